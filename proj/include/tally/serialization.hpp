#pragma once

#include <string>

#include <json.hpp>

#include "tally/estimator.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/sampling.hpp"
#include "tally/scaling.hpp"
#include "tally/typical_table.hpp"

// JSON wire formats. Margins are {"rows":[...],"cols":[...]}; tables and
// matrices are row-major arrays with explicit dimensions; counts travel as
// decimal strings (arbitrary precision) plus a log10 convenience field.

namespace tally {

using json = nlohmann::json;

inline json to_json(const Margins& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}};
}

inline Margins margins_from_json(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols"))
        throw std::invalid_argument("margins JSON must be an object with \"rows\" and \"cols\"");
    return Margins(j.at("rows").get<std::vector<std::int64_t>>(),
                   j.at("cols").get<std::vector<std::int64_t>>());
}

inline json to_json(const Table& t) {
    return json{{"m", t.rows()}, {"n", t.cols()}, {"entries", t.data()}};
}

inline Table table_from_json(const json& j) {
    Table t(j.at("m").get<std::size_t>(), j.at("n").get<std::size_t>());
    auto entries = j.at("entries").get<std::vector<std::int64_t>>();
    if (entries.size() != t.rows() * t.cols())
        throw std::invalid_argument("table entry count does not match dimensions");
    t.data() = std::move(entries);
    return t;
}

inline json to_json(const Matrix& x) {
    return json{{"m", x.rows()}, {"n", x.cols()}, {"entries", x.data()}};
}

inline Matrix matrix_from_json(const json& j) {
    Matrix x(j.at("m").get<std::size_t>(), j.at("n").get<std::size_t>());
    auto entries = j.at("entries").get<std::vector<double>>();
    if (entries.size() != x.rows() * x.cols())
        throw std::invalid_argument("matrix entry count does not match dimensions");
    x.data() = std::move(entries);
    return x;
}

inline json count_to_json(const mpz_class& count) {
    return json{{"count", count.get_str()}, {"log10_count", log10_mpz(count)}};
}

inline json to_json(const TypicalTable& t) {
    return json{{"entries", to_json(t.entries)},
                {"dual_x", t.dual.x},
                {"dual_y", t.dual.y},
                {"log_rho", t.log_rho},
                {"residual", t.residual}};
}

inline json to_json(const ScalingResult& s) {
    return json{{"Y", to_json(s.Y)},
                {"lambda", s.lambda},
                {"mu", s.mu},
                {"iterations", s.iterations},
                {"residual", s.residual}};
}

inline json to_json(const PFactor& p) {
    if (p.is_bracket)
        return json{{"bracket", {{"log_lo", p.log_lo}, {"log_hi", p.log_hi}}}};
    return json{{"log_value", p.log_value}};
}

inline json to_json(const FactorReport& f) {
    return json{{"log_phi", f.log_phi},
                {"log_p", f.log_p},
                {"log_f", f.log_f},
                {"consistency_gap", f.consistency_gap}};
}

inline json to_json(const SmoothnessReport& r) {
    json j{{"alpha_min_upper", r.alpha_min_upper},
           {"beta_max_lower", r.beta_max_lower},
           {"moderate_s0", r.moderate_s0},
           {"golden_flag", r.golden_flag},
           {"linear_flag", r.linear_flag}};
    if (r.strong_alpha) j["strong_alpha"] = *r.strong_alpha;
    return j;
}

inline json to_json(const MarginStats& st) {
    return json{{"N", st.N},       {"m", st.m},           {"n", st.n},
                {"s", st.s},       {"r_plus", st.r_plus}, {"r_minus", st.r_minus},
                {"c_plus", st.c_plus}, {"c_minus", st.c_minus}};
}

inline json to_json(const EstimateReport& r, bool include_timing = false) {
    json j{{"method", method_name(r.method)},
           {"log_estimate", r.log_estimate},
           {"log10_estimate", r.log_estimate / 2.302585092994045684},
           {"log_std_error", r.log_std_error},
           {"sigma_log", r.sigma_log()},
           {"samples_used", r.samples_used},
           {"seed", r.seed}};
    if (r.tau_log) j["tau_log"] = *r.tau_log;
    if (r.truncated_fraction) j["truncated_fraction"] = *r.truncated_fraction;
    if (include_timing) j["wall_seconds"] = r.wall_seconds;
    return j;
}

/// Chain samples as JSON lines, one matrix per line with chain id and step
/// index; pairs with the diagnostics object below.
inline std::string nu_samples_to_jsonl(const NuSamples& nu, int chain_id) {
    std::string out;
    for (std::size_t k = 0; k < nu.samples.size(); ++k) {
        json line{{"chain", chain_id}, {"step", k}, {"matrix", to_json(nu.samples[k])}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

inline json nu_diagnostics_json(const NuSamples& nu) {
    return json{{"acceptance_rate", nu.acceptance_rate},
                {"restarts", nu.restarts},
                {"steps", nu.steps},
                {"delta_interior", nu.delta_interior},
                {"samples", nu.samples.size()}};
}

inline json to_json(const TailChecks& t) {
    json j{{"samples", t.samples},
           {"freq_sum_exceeds", t.freq_sum_exceeds},
           {"ceiling", t.ceiling},
           {"exceed_count", t.exceed_count}};
    if (t.has_p_stats) {
        j["mean_log_p"] = t.mean_log_p;
        j["max_log_p"] = t.max_log_p;
        j["frac_log_p_above"] = t.frac_log_p_above;
        j["log_p_threshold"] = t.log_p_threshold;
    }
    if (t.has_moment_check) {
        j["mc_mean"] = t.mc_mean;
        j["mc_se"] = t.mc_se;
        j["exact_value"] = t.exact_value;
        j["z"] = t.z;
    }
    return j;
}

} // namespace tally
