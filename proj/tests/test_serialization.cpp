#include <doctest.h>

#include "tally/serialization.hpp"

#include "oracles.hpp"

using tally::Margins;
using tally::Matrix;

TEST_CASE("margins JSON schema round-trips") {
    const Margins m({3, 2, 1}, {2, 2, 2});
    const auto j = tally::to_json(m);
    CHECK(j.dump() == R"({"cols":[2,2,2],"rows":[3,2,1]})");
    const Margins back = tally::margins_from_json(j);
    CHECK(back.rows() == m.rows());
    CHECK(back.cols() == m.cols());
}

TEST_CASE("malformed margins are rejected") {
    CHECK_THROWS_AS(tally::margins_from_json(tally::json::parse(R"({"rows":[1,2]})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(tally::margins_from_json(tally::json::parse(R"({"rows":[1,2],"cols":[1,1]})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(tally::margins_from_json(tally::json::parse("[1,2]")), std::invalid_argument);
}

TEST_CASE("tables and matrices round-trip through row-major arrays") {
    tally::Rng rng(3);
    tally::Table t(2, 3);
    for (auto& v : t.data()) v = static_cast<std::int64_t>(rng.uniform_index(5));
    const auto jt = tally::to_json(t);
    CHECK(tally::table_from_json(jt) == t);

    Matrix x(3, 2);
    for (auto& v : x.data()) v = rng.uniform01();
    const auto jx = tally::to_json(x);
    const Matrix back = tally::matrix_from_json(jx);
    CHECK(back.data() == x.data());
    CHECK(back.rows() == x.rows());

    auto bad = jx;
    bad["entries"].erase(0);
    CHECK_THROWS_AS(tally::matrix_from_json(bad), std::invalid_argument);
}

TEST_CASE("counts carry both the decimal string and a log10 field") {
    mpz_class big = 1;
    for (int i = 2; i <= 30; ++i) big *= i; // 30!
    const auto j = tally::count_to_json(big);
    CHECK(j["count"] == "265252859812191058636308480000000");
    CHECK(j["log10_count"].get<double>() == doctest::Approx(32.42366).epsilon(1e-5));
}

TEST_CASE("estimate reports serialize their knobs and optionals") {
    tally::EstimateReport rep;
    rep.method = tally::EstimateMethod::full;
    rep.log_estimate = 1.0;
    rep.log_std_error = -2.0;
    rep.samples_used = 10;
    rep.tau_log = 3.5;
    rep.truncated_fraction = 0.25;
    rep.wall_seconds = 1.25;
    const auto j = tally::to_json(rep);
    CHECK(j["method"] == "full");
    CHECK(j["tau_log"].get<double>() == doctest::Approx(3.5));
    CHECK_FALSE(j.contains("wall_seconds")); // timing only on request
    CHECK(tally::to_json(rep, true).contains("wall_seconds"));

    tally::EstimateReport plain;
    plain.method = tally::EstimateMethod::plain;
    const auto jp = tally::to_json(plain);
    CHECK_FALSE(jp.contains("tau_log"));
    CHECK_FALSE(jp.contains("truncated_fraction"));
}

TEST_CASE("chain dumps carry chain id, step index and diagnostics") {
    const Margins margins({2, 2}, {2, 2});
    tally::ChainConfig config;
    config.burn_in = 50;
    config.thinning = 2;
    tally::Rng rng(3);
    const auto nu = tally::sample_nu(margins, config, 5, rng);
    const std::string dump = tally::nu_samples_to_jsonl(nu, 4);
    std::istringstream lines(dump);
    std::string line;
    int k = 0;
    while (std::getline(lines, line)) {
        const auto j = tally::json::parse(line);
        CHECK(j["chain"] == 4);
        CHECK(j["step"] == k);
        const Matrix back = tally::matrix_from_json(j["matrix"]);
        CHECK(back.sum() == doctest::Approx(1.0).epsilon(1e-12));
        ++k;
    }
    CHECK(k == 5);
    const auto diag = tally::nu_diagnostics_json(nu);
    CHECK(diag["samples"] == 5);
    CHECK(diag.contains("acceptance_rate"));
    CHECK(diag.contains("restarts"));
}
