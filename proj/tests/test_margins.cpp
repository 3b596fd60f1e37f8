#include <doctest.h>

#include "tally/margins.hpp"
#include "tally/rng.hpp"

#include "oracles.hpp"

using tally::Margins;

TEST_CASE("margin stats on small cases") {
    {
        const auto st = tally::margin_stats(Margins({1, 1}, {1, 1}));
        CHECK(st.N == 2);
        CHECK(st.s == doctest::Approx(0.5));
        CHECK(st.r_plus == 1);
        CHECK(st.r_minus == 1);
        CHECK(st.c_plus == 1);
        CHECK(st.c_minus == 1);
    }
    {
        const auto st = tally::margin_stats(Margins({2, 1}, {2, 1}));
        CHECK(st.N == 3);
        CHECK(st.s == doctest::Approx(0.75));
        CHECK(st.r_plus == 2);
        CHECK(st.r_minus == 1);
    }
    {
        const auto st = tally::margin_stats(Margins({3, 3, 3}, {3, 3, 3}));
        CHECK(st.N == 9);
        CHECK(st.s == doctest::Approx(1.0));
        CHECK(st.r_plus == 3);
        CHECK(st.c_minus == 3);
    }
}

TEST_CASE("margin validation") {
    CHECK_THROWS_AS(Margins({1, 2}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Margins({0, 2}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Margins({}, {1}), std::invalid_argument);
    CHECK_NOTHROW(Margins({5}, {2, 2, 1})); // one-row margins are fine
}

TEST_CASE("smoothness classification flags") {
    tally::SmoothnessParams p;
    p.golden_rho = 1.0;
    p.golden_eps = 0.1;
    {
        const auto rep = tally::classify_smoothness(Margins({3, 3, 3}, {3, 3, 3}), p);
        CHECK(rep.golden_flag); // spread ratios are 1, 1 <= 1 + 1 - 0.1
        CHECK(rep.alpha_min_upper == doctest::Approx(1.0));
        CHECK(rep.beta_max_lower == doctest::Approx(1.0));
    }
    {
        tally::SmoothnessParams q;
        q.golden_rho = 2.0;
        q.golden_eps = 0.1;
        const auto rep = tally::classify_smoothness(Margins({5, 3}, {4, 4}), q);
        CHECK(rep.golden_flag); // 5/3 * 1 <= 5/3 + 1 - 0.1
    }
    {
        tally::SmoothnessParams q;
        q.golden_rho = 2.0;
        q.golden_eps = 0.1;
        const auto rep = tally::classify_smoothness(Margins({8, 2}, {5, 5}), q);
        CHECK(rep.golden_flag); // 4 * 1 <= 4 + 1 - 0.1
    }
    {
        tally::SmoothnessParams q;
        q.golden_rho = 2.0;
        q.golden_eps = 0.1;
        // both ratios 2: 4 > 2 + 0.9
        const auto rep = tally::classify_smoothness(Margins({4, 2}, {4, 2}), q);
        CHECK_FALSE(rep.golden_flag);
    }
}

TEST_CASE("linear-family flag requires eps*beta < 1") {
    // c+ = 2 <= 0.5 * m needs m >= 4
    tally::SmoothnessParams p;
    p.linear_beta = 1.5;
    p.linear_eps = 0.5;
    const Margins margins({2, 2, 2, 2}, {2, 2, 2, 2});
    CHECK(tally::classify_smoothness(margins, p).linear_flag);
    p.linear_eps = 0.9; // eps*beta = 1.35 >= 1 disables the family
    CHECK_FALSE(tally::classify_smoothness(margins, p).linear_flag);
}

TEST_CASE("strong alpha from a supplied typical maximum") {
    const Margins margins({3, 3, 3}, {3, 3, 3});
    const auto rep = tally::classify_smoothness(margins, tally::SmoothnessParams{}, 1.0);
    REQUIRE(rep.strong_alpha.has_value());
    CHECK(*rep.strong_alpha == doctest::Approx(1.0)); // max entry 1, s = 1
    CHECK(*rep.strong_alpha * rep.moderate_s0 >= 1.0 - 1e-12);
}

TEST_CASE("typical entry bounds on known cases") {
    {
        const auto b = tally::typical_entry_bounds(Margins({1, 1}, {1, 1}));
        CHECK(b.lower == doctest::Approx(0.5));
        REQUIRE(b.upper.has_value());
        CHECK(*b.upper == doctest::Approx(0.5));
    }
    {
        const auto b = tally::typical_entry_bounds(Margins({7}, {7}));
        CHECK(b.lower == doctest::Approx(7.0)); // 1x1 table is forced
    }
    {
        const auto b = tally::typical_entry_bounds(Margins({3, 3, 3}, {3, 3, 3}));
        CHECK(b.lower == doctest::Approx(1.0));
        REQUIRE(b.upper.has_value());
        CHECK(*b.upper == doctest::Approx(1.0));
    }
}

TEST_CASE("entry bounds and stats respect transposition and permutation") {
    tally::Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::int64_t> rows(1 + rng.uniform_index(4));
        std::int64_t total = 0;
        for (auto& r : rows) {
            r = 1 + static_cast<std::int64_t>(rng.uniform_index(5));
            total += r;
        }
        std::vector<std::int64_t> cols(1 + rng.uniform_index(4), 0);
        for (std::int64_t k = 0; k < total; ++k) ++cols[rng.uniform_index(cols.size())];
        bool ok = true;
        for (auto c : cols) ok = ok && c >= 1;
        if (!ok) continue;
        const Margins margins(rows, cols);

        const auto b = tally::typical_entry_bounds(margins);
        if (b.upper) CHECK(b.lower <= *b.upper + 1e-12);

        const auto bt = tally::typical_entry_bounds(margins.transposed());
        CHECK(b.lower == doctest::Approx(bt.lower));
        CHECK(b.upper.has_value() == bt.upper.has_value());
        if (b.upper) CHECK(*b.upper == doctest::Approx(*bt.upper));

        // permuting rows and columns changes nothing
        auto rows_p = rows;
        auto cols_p = cols;
        std::reverse(rows_p.begin(), rows_p.end());
        std::reverse(cols_p.begin(), cols_p.end());
        const Margins permuted(rows_p, cols_p);
        const tally::SmoothnessParams params{1.5, 0.2, 2.0, 0.4};
        const auto s1 = tally::classify_smoothness(margins, params);
        const auto s2 = tally::classify_smoothness(permuted, params);
        CHECK(s1.golden_flag == s2.golden_flag);
        CHECK(s1.linear_flag == s2.linear_flag);
        CHECK(s1.alpha_min_upper == doctest::Approx(s2.alpha_min_upper));
    }
}
