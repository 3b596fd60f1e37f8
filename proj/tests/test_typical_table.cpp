#include <doctest.h>

#include <cmath>

#include "tally/exact_count.hpp"
#include "tally/typical_table.hpp"

#include "oracles.hpp"

using tally::Margins;
using tally::Matrix;

namespace {

Margins random_margins(tally::Rng& rng, std::size_t max_dim, std::int64_t max_row) {
    while (true) {
        std::vector<std::int64_t> rows(1 + rng.uniform_index(max_dim));
        std::int64_t total = 0;
        for (auto& r : rows) {
            r = 1 + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::size_t>(max_row)));
            total += r;
        }
        std::vector<std::int64_t> cols(1 + rng.uniform_index(max_dim), 0);
        for (std::int64_t k = 0; k < total; ++k) ++cols[rng.uniform_index(cols.size())];
        bool ok = true;
        for (auto c : cols) ok = ok && c >= 1;
        if (ok) return Margins(rows, cols);
    }
}

} // namespace

TEST_CASE("g on simple matrices") {
    CHECK(tally::g_value(Matrix(2, 3, 0.0)) == doctest::Approx(0.0));
    CHECK(tally::g_value(Matrix(1, 1, 1.0)) == doctest::Approx(2.0 * std::log(2.0)));
    CHECK(tally::g_value(Matrix(2, 2, 1.0)) == doctest::Approx(8.0 * std::log(2.0)));
    Matrix neg(1, 1, -0.5);
    CHECK_THROWS_AS(tally::g_value(neg), std::invalid_argument);
}

TEST_CASE("forced 1x1 table") {
    for (std::int64_t t : {1, 2, 7, 40}) {
        const auto typ = tally::solve_typical(Margins({t}, {t}));
        CHECK(typ.entries(0, 0) == doctest::Approx(static_cast<double>(t)).epsilon(1e-9));
        const double expect = (t + 1) * std::log(static_cast<double>(t) + 1.0) -
                              t * std::log(static_cast<double>(t));
        CHECK(typ.log_rho == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("equal row sums give entries c_j/m") {
    const Margins margins({4, 4, 4}, {5, 3, 2, 2});
    const auto typ = tally::solve_typical(margins);
    CHECK(typ.residual <= 1e-10);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(typ.entries(i, j) ==
                  doctest::Approx(static_cast<double>(margins.cols()[j]) / 3.0).epsilon(1e-9));
}

TEST_CASE("magic margins solve to the constant table") {
    const auto typ = tally::solve_typical(Margins({3, 3, 3}, {3, 3, 3}));
    for (double v : typ.entries.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(typ.log_rho == doctest::Approx(9.0 * std::log(4.0)).epsilon(1e-10));
}

TEST_CASE("solver certificate: dual identity, stationarity, optimality") {
    tally::Rng rng(41);
    for (int trial = 0; trial < 15; ++trial) {
        const Margins margins = random_margins(rng, 4, 6);
        const auto typ = tally::solve_typical(margins);
        CHECK(typ.residual <= 1e-10);

        // entries reconstruct from the dual point
        for (std::size_t i = 0; i < margins.row_count(); ++i)
            for (std::size_t j = 0; j < margins.col_count(); ++j) {
                const double p = typ.dual.x[i] * typ.dual.y[j];
                CHECK(std::abs(typ.entries(i, j) - p / (1.0 - p)) <= 1e-12);
            }

        // the maximum value equals g at the maximizer
        CHECK(typ.log_rho == doctest::Approx(tally::g_value(typ.entries)).epsilon(1e-9));

        // g is no larger at random polytope points
        if (tally::dp_state_bound(margins) <= tally::kDefaultDpStateBudget) {
            tally::TableCounter counter(margins, tally::kDefaultDpStateBudget, false);
            counter.count();
            for (int probe = 0; probe < 20; ++probe) {
                const auto t1 = counter.sample(rng);
                const auto t2 = counter.sample(rng);
                const double a = rng.uniform01();
                Matrix Z(margins.row_count(), margins.col_count());
                for (std::size_t k = 0; k < Z.size(); ++k)
                    Z.data()[k] = a * static_cast<double>(t1.data()[k]) +
                                  (1.0 - a) * static_cast<double>(t2.data()[k]);
                CHECK(tally::g_value(Z) <= typ.log_rho + 1e-9);
            }
        }

        // entry bounds from the margins hold at the solution
        const auto bounds = tally::typical_entry_bounds(margins);
        for (double v : typ.entries.data()) {
            CHECK(v >= bounds.lower - 1e-9);
            if (bounds.upper) CHECK(v <= *bounds.upper + 1e-9);
        }
    }
}

TEST_CASE("permuting margins permutes the table") {
    const Margins margins({5, 2, 3}, {4, 4, 2});
    const Margins swapped({2, 5, 3}, {4, 4, 2});
    const auto a = tally::solve_typical(margins);
    const auto b = tally::solve_typical(swapped);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(a.entries(0, j) == doctest::Approx(b.entries(1, j)).epsilon(1e-9));
        CHECK(a.entries(1, j) == doctest::Approx(b.entries(0, j)).epsilon(1e-9));
        CHECK(a.entries(2, j) == doctest::Approx(b.entries(2, j)).epsilon(1e-9));
    }
}

TEST_CASE("count never exceeds the convex bound") {
    tally::Rng rng(43);
    for (int trial = 0; trial < 15; ++trial) {
        const Margins margins = random_margins(rng, 3, 4);
        if (tally::dp_state_bound(margins) > tally::kDefaultDpStateBudget) continue;
        const double ln_count = tally::log_mpz(tally::count_tables(margins));
        const auto typ = tally::solve_typical(margins);
        CHECK(ln_count <= typ.log_rho + 1e-9);
    }
}

TEST_CASE("weighted bound") {
    SUBCASE("all-ones weights recover the plain bound") {
        const Margins margins({3, 2}, {2, 2, 1});
        const Matrix W(2, 3, 1.0);
        const auto typ = tally::solve_typical(margins, 1e-11);
        CHECK(tally::log_rho_weighted(margins, W, 1e-11) ==
              doctest::Approx(typ.log_rho).epsilon(1e-8));
    }
    SUBCASE("upper-bounds the weighted sum; scaling covariance") {
        tally::Rng rng(47);
        for (int trial = 0; trial < 10; ++trial) {
            const Margins margins = random_margins(rng, 3, 3);
            Matrix W(margins.row_count(), margins.col_count());
            for (double& v : W.data()) v = 0.2 + 2.0 * rng.uniform01();
            const double bound = tally::log_rho_weighted(margins, W);
            const double exact = tally::count_weighted(margins, W).log();
            CHECK(exact <= bound + 1e-8);

            const double c = 0.3 + 2.0 * rng.uniform01();
            const double scaled = tally::log_rho_weighted(margins, W.scaled(c));
            CHECK(scaled == doctest::Approx(bound + margins.total() * std::log(c)).epsilon(1e-7));
        }
    }
    SUBCASE("simple 2x2 lower sanity") {
        const Margins margins({1, 1}, {1, 1});
        const Matrix W(2, 2, 1.0);
        CHECK(tally::log_rho_weighted(margins, W) >= std::log(2.0) - 1e-9);
    }
    SUBCASE("degenerate weights rejected") {
        const Margins margins({1, 1}, {1, 1});
        Matrix W(2, 2, 1.0);
        W(0, 0) = W(0, 1) = 0.0;
        CHECK_THROWS_AS(tally::log_rho_weighted(margins, W), std::invalid_argument);
    }
}

TEST_CASE("classification accepts a solved typical table") {
    const Margins margins({5, 3}, {4, 4});
    const auto typ = tally::solve_typical(margins);
    const auto rep = tally::classify_smoothness(margins, typ, tally::SmoothnessParams{2.0, 0.1, 2.0, 0.4});
    REQUIRE(rep.strong_alpha.has_value());
    // the stored pair always satisfies strong_alpha * s >= max entry
    CHECK(*rep.strong_alpha * rep.moderate_s0 >= typ.max_entry() - 1e-12);
    CHECK(rep.golden_flag);
}

TEST_CASE("very large margins stop at the fp floor inside the scaled tolerance") {
    const Margins margins({1000000, 1}, {500000, 500001});
    const auto typ = tally::solve_typical(margins);
    // absolute residual is limited by rounding at this magnitude; the
    // contract allows tol * max(r+, c+)
    CHECK(typ.residual <= 1e-10 * 1000000.0);
    CHECK(typ.entries(1, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(typ.entries(0, 0) == doctest::Approx(499999.5).epsilon(1e-6));
}
