// tally: exact and randomized counting of non-negative integer matrices
// with prescribed row and column sums, plus the supporting solvers,
// bounds, samplers and self-check suites.
//
// Exit codes: 0 success, 1 validation error, 2 budget/convergence error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tally/tally.hpp"

namespace {

using tally::json;

double dp_budget_from_env() {
    if (const char* env = std::getenv("TALLY_DP_BUDGET")) {
        try {
            const double v = std::stod(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("TALLY_DP_BUDGET must be a positive number");
        }
    }
    return tally::kDefaultDpStateBudget;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open input file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // report the 1-based line of the failure, not just the byte offset
        std::size_t line = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k)
            if (text[k] == '\n') ++line;
        throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + e.what());
    }
}

tally::Margins load_margins(const std::string& path) {
    return tally::margins_from_json(load_json(path));
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void emit(const json& j, const std::string& format) {
    if (format == "csv") {
        // flat key,value dump; nested values are inlined as quoted JSON text
        std::ostringstream keys, vals;
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) {
                keys << ",";
                vals << ",";
            }
            first = false;
            keys << it.key();
            vals << csv_quote(it.value().is_string() ? it.value().get<std::string>()
                                                     : it.value().dump());
        }
        std::cout << keys.str() << "\n" << vals.str() << "\n";
    } else {
        std::cout << j.dump(2) << "\n";
    }
}

struct CheckOptions {
    std::string suite;
    std::int64_t trials = 100;
    std::uint64_t seed = 0;
    double budget = tally::kDefaultDpStateBudget;
};

tally::Matrix random_positive_matrix(std::size_t m, std::size_t n, tally::Rng& rng) {
    tally::Matrix X(m, n);
    for (double& v : X.data()) v = 0.05 + rng.exponential();
    return X;
}

json run_check(const tally::Margins& margins, const CheckOptions& opt) {
    tally::Rng rng(opt.seed);
    json rep{{"suite", opt.suite}, {"trials", opt.trials}, {"seed", opt.seed}};
    std::int64_t violations = 0;
    double worst = 0.0;

    if (opt.suite == "thm52") {
        for (std::int64_t t = 0; t < opt.trials; ++t) {
            const auto X = random_positive_matrix(margins.row_count(), margins.col_count(), rng);
            const auto cells = tally::scaled_entry_bound_report(X, margins);
            if (!cells.all_pass) ++violations;
            worst = std::max(worst, cells.max_violation);
        }
    } else if (opt.suite == "thm81" || opt.suite == "lemma82") {
        for (std::int64_t t = 0; t < opt.trials; ++t) {
            auto X = random_positive_matrix(margins.row_count(), margins.col_count(), rng);
            const auto var = tally::variational_reports(X, margins, 100, rng, 1e-10, 1e-8, opt.budget);
            if (opt.suite == "thm81") {
                if (!var.entropy_min_ok) ++violations;
                worst = std::min(var.min_trial_gap, worst);
            } else {
                if (!var.weighted_log_ok) ++violations;
                worst = std::min(var.weighted_log_gap, worst);
            }
        }
    } else if (opt.suite == "lemma91") {
        tally::Matrix lambda(margins.row_count(), margins.col_count(), 0.5);
        const auto checks =
            tally::empirical_tail_checks(margins, opt.trials, rng, &lambda, std::nullopt, opt.budget);
        rep["mc_mean"] = checks.mc_mean;
        rep["mc_se"] = checks.mc_se;
        rep["exact_value"] = checks.exact_value;
        rep["z"] = checks.z;
        if (std::abs(checks.z) > 3.0) ++violations;
        worst = checks.z;
    } else if (opt.suite == "lemma93") {
        const auto checks =
            tally::empirical_tail_checks(margins, opt.trials, rng, nullptr, std::nullopt, opt.budget);
        const double slack =
            3.0 * std::sqrt(checks.ceiling * (1.0 - checks.ceiling) / static_cast<double>(opt.trials));
        rep["freq"] = checks.freq_sum_exceeds;
        rep["ceiling"] = checks.ceiling;
        if (checks.freq_sum_exceeds > checks.ceiling + slack) ++violations;
        worst = checks.freq_sum_exceeds - checks.ceiling;
    } else if (opt.suite == "lemma113") {
        for (std::int64_t t = 0; t < opt.trials; ++t) {
            const std::int64_t m = 1 + static_cast<std::int64_t>(rng.uniform_index(5));
            const std::int64_t c = static_cast<std::int64_t>(rng.uniform_index(9));
            std::vector<double> lam(static_cast<std::size_t>(m));
            for (double& l : lam) l = 0.99 - 2.0 * rng.uniform01();
            const auto res = tally::simplex_sum(m, c, lam);
            if (!res.brute) continue;
            const double rel = std::abs(*res.brute - res.closed) / std::abs(res.closed);
            worst = std::max(worst, rel);
            if (rel > 1e-10) ++violations;
        }
    } else if (opt.suite == "factorization") {
        for (std::int64_t t = 0; t < opt.trials; ++t) {
            const auto X =
                tally::sample_simplex_uniform(margins.row_count(), margins.col_count(), rng);
            const auto fr = tally::factor_report(X, margins, 1e-12, opt.budget);
            worst = std::max(worst, fr.consistency_gap);
            if (fr.consistency_gap > 1e-6) ++violations;
        }
    } else {
        throw std::invalid_argument("unknown suite: " + opt.suite);
    }

    rep["violations"] = violations;
    rep["worst"] = worst;
    rep["pass"] = violations == 0;
    return rep;
}

json benchmark_row(const std::filesystem::path& file, std::uint64_t seed, double budget,
                   std::int64_t samples, std::int64_t nu_samples) {
    json row{{"file", file.filename().string()}};
    try {
        const tally::Margins margins = load_margins(file.string());
        const auto st = tally::margin_stats(margins);
        row["N"] = st.N;
        row["m"] = st.m;
        row["n"] = st.n;
        const auto typ = tally::solve_typical(margins);
        const auto smooth = tally::classify_smoothness(
            margins, tally::SmoothnessParams{2.0, 0.1, 2.0, 0.4}, typ.max_entry());
        row["golden_flag"] = smooth.golden_flag;
        row["linear_flag"] = smooth.linear_flag;
        row["log_rho"] = typ.log_rho;
        if (tally::dp_state_bound(margins) <= budget) {
            row["ln_count"] = tally::log_mpz(tally::count_tables(margins, budget));
        } else {
            row["ln_count"] = nullptr;
        }
        const auto plain = tally::estimate_plain(margins, samples, seed, budget);
        row["plain_log_est"] = plain.log_estimate;
        row["plain_sigma_log"] = plain.sigma_log();
        row["plain_wall"] = plain.wall_seconds;
        const auto full = tally::estimate_full(margins, samples, nu_samples, 1.0,
                                               tally::ChainConfig{}, seed, budget);
        row["full_log_est"] = full.log_estimate;
        row["full_sigma_log"] = full.sigma_log();
        row["full_truncated_fraction"] = *full.truncated_fraction;
        row["full_wall"] = full.wall_seconds;
        row["error"] = "";
    } catch (const tally::budget_error&) {
        row["error"] = "budget";
    } catch (const tally::convergence_error&) {
        row["error"] = "convergence";
    } catch (const std::exception& e) {
        row["error"] = std::string("invalid: ") + e.what();
    }
    return row;
}

std::string csv_field(const json& row, const std::string& key) {
    if (!row.contains(key) || row[key].is_null()) return "";
    const json& v = row[key];
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"counting contingency tables: exact DP, convex bounds and randomized estimators"};
    app.require_subcommand(1);

    std::string input_path;
    std::uint64_t seed = 0;
    std::string format = "json";
    double tol = 1e-10;
    bool timings = false;

    auto add_common = [&](CLI::App* cmd, bool needs_input = true) {
        if (needs_input)
            cmd->add_option("input", input_path, "margins JSON file {\"rows\":[..],\"cols\":[..]}")
                ->required();
        cmd->add_option("--seed", seed, "random seed (default 0; all randomness is seeded)");
        cmd->add_option("--format", format, "output format: json or csv")
            ->check(CLI::IsMember({"json", "csv"}));
        cmd->add_flag("--timings", timings, "include wall-clock fields in reports");
    };

    auto* cmd_exact = app.add_subcommand("exact", "exact table count by dynamic programming");
    add_common(cmd_exact);

    auto* cmd_estimate = app.add_subcommand("estimate", "randomized estimate of the table count");
    add_common(cmd_estimate);
    std::string method = "plain";
    std::int64_t samples = 10000, nu_samples = 2000;
    double delta_exponent = 1.0;
    std::int64_t burnin = 1000, thin = 10;
    int workers = 1;
    cmd_estimate->add_option("--method", method, "plain | phi | full")
        ->check(CLI::IsMember({"plain", "phi", "full"}));
    cmd_estimate->add_option("--samples", samples, "simplex samples (plain/phi) or phi samples (full)");
    cmd_estimate->add_option("--nu-samples", nu_samples, "chain samples for the full method");
    cmd_estimate->add_option("--delta-exponent", delta_exponent,
                             "threshold exponent; negative or inf disables truncation");
    cmd_estimate->add_option("--burnin", burnin, "chain burn-in steps");
    cmd_estimate->add_option("--thin", thin, "chain thinning");
    double delta_interior = 0.0;
    cmd_estimate->add_option("--delta-interior", delta_interior,
                             "interior margin for the chain (0 = default)");
    cmd_estimate->add_option("--workers", workers, "worker threads for sampling chunks");
    cmd_estimate->add_option("--tol", tol, "scaling/solver tolerance");

    auto* cmd_typical = app.add_subcommand("typical", "typical table and its dual point");
    add_common(cmd_typical);
    cmd_typical->add_option("--tol", tol, "margin residual tolerance");

    auto* cmd_scale = app.add_subcommand("scale", "scale a positive matrix to the margins");
    add_common(cmd_scale);
    std::string matrix_path;
    cmd_scale->add_option("--matrix", matrix_path, "matrix JSON {\"m\":..,\"n\":..,\"entries\":[..]}")
        ->required();
    cmd_scale->add_option("--tol", tol, "relative margin residual tolerance");

    auto* cmd_bounds = app.add_subcommand("bounds", "entrywise typical-table bounds and the p bound");
    add_common(cmd_bounds);

    auto* cmd_smooth = app.add_subcommand("smoothness", "margin smoothness classification");
    add_common(cmd_smooth);
    tally::SmoothnessParams sparams{2.0, 0.1, 2.0, 0.4};
    bool no_typical = false;
    cmd_smooth->add_option("--golden-rho", sparams.golden_rho, "dimension ratio bound");
    cmd_smooth->add_option("--golden-eps", sparams.golden_eps, "margin spread slack in (0,1)");
    cmd_smooth->add_option("--linear-beta", sparams.linear_beta, "row spread bound");
    cmd_smooth->add_option("--linear-eps", sparams.linear_eps, "column-to-rows ratio bound");
    cmd_smooth->add_flag("--no-typical", no_typical, "skip solving the typical table");

    auto* cmd_sample = app.add_subcommand("sample-tables", "uniform tables, one JSON per line");
    add_common(cmd_sample);
    std::int64_t count = 1;
    cmd_sample->add_option("--count", count, "number of tables to draw");

    auto* cmd_check = app.add_subcommand("check", "property self-check suites");
    add_common(cmd_check);
    CheckOptions copt;
    cmd_check
        ->add_option("--suite", copt.suite,
                     "thm52 | thm81 | lemma82 | lemma91 | lemma93 | lemma113 | factorization")
        ->required()
        ->check(CLI::IsMember(
            {"thm52", "thm81", "lemma82", "lemma91", "lemma93", "lemma113", "factorization"}));
    cmd_check->add_option("--trials", copt.trials, "trial or sample count for the suite");

    auto* cmd_bench = app.add_subcommand("benchmark", "comparison table over a margins corpus");
    add_common(cmd_bench, false);
    std::string corpus_dir, out_path;
    std::int64_t bench_samples = 10000, bench_nu = 1000;
    cmd_bench->add_option("--corpus", corpus_dir, "directory of margins JSON files")->required();
    cmd_bench->add_option("--out", out_path, "output CSV path")->required();
    cmd_bench->add_option("--samples", bench_samples, "simplex samples per instance");
    cmd_bench->add_option("--nu-samples", bench_nu, "chain samples per instance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const double budget = dp_budget_from_env();

        if (cmd_exact->parsed()) {
            const auto margins = load_margins(input_path);
            const mpz_class c = tally::count_tables(margins, budget);
            json out = tally::count_to_json(c);
            out["seed"] = seed;
            emit(out, format);
        } else if (cmd_estimate->parsed()) {
            const auto margins = load_margins(input_path);
            tally::EstimateReport rep;
            if (method == "plain") {
                rep = tally::estimate_plain(margins, samples, seed, budget, workers);
            } else if (method == "phi") {
                rep = tally::estimate_phi_only(margins, samples, seed, tol, workers);
            } else {
                tally::ChainConfig config;
                config.burn_in = burnin;
                config.thinning = thin;
                config.delta_interior = delta_interior;
                config.seed = seed;
                rep = tally::estimate_full(margins, samples, nu_samples, delta_exponent, config,
                                           seed, budget, tol, workers);
            }
            json out = tally::to_json(rep, timings);
            out["knobs"] = {{"method", method},
                            {"samples", samples},
                            {"nu_samples", nu_samples},
                            {"delta_exponent", delta_exponent},
                            {"burnin", burnin},
                            {"thin", thin},
                            {"tol", tol},
                            {"workers", workers}};
            emit(out, format);
        } else if (cmd_typical->parsed()) {
            const auto margins = load_margins(input_path);
            const auto typ = tally::solve_typical(margins, tol);
            json out = tally::to_json(typ);
            out["knobs"] = {{"tol", tol}};
            emit(out, format);
        } else if (cmd_scale->parsed()) {
            const auto margins = load_margins(input_path);
            const auto X = tally::matrix_from_json(load_json(matrix_path));
            const auto sc = tally::sinkhorn(X, margins, tol);
            json out = tally::to_json(sc);
            out["knobs"] = {{"tol", tol}, {"matrix", matrix_path}};
            emit(out, format);
        } else if (cmd_bounds->parsed()) {
            const auto margins = load_margins(input_path);
            const auto eb = tally::typical_entry_bounds(margins);
            json out{{"entry_lower", eb.lower},
                     {"entry_upper", eb.upper ? json(*eb.upper) : json(nullptr)},
                     {"log_p_upper", tally::p_upper_bound(margins)}};
            emit(out, format);
        } else if (cmd_smooth->parsed()) {
            const auto margins = load_margins(input_path);
            std::optional<double> typical_max;
            if (!no_typical) typical_max = tally::solve_typical(margins).max_entry();
            const auto rep = tally::classify_smoothness(margins, sparams, typical_max);
            json out = tally::to_json(rep);
            out["stats"] = tally::to_json(tally::margin_stats(margins));
            out["knobs"] = {{"golden_rho", sparams.golden_rho},
                            {"golden_eps", sparams.golden_eps},
                            {"linear_beta", sparams.linear_beta},
                            {"linear_eps", sparams.linear_eps},
                            {"no_typical", no_typical}};
            emit(out, format);
        } else if (cmd_sample->parsed()) {
            const auto margins = load_margins(input_path);
            tally::TableCounter counter(margins, budget, false);
            counter.count();
            tally::Rng rng(seed);
            for (std::int64_t i = 0; i < count; ++i) {
                const auto t = counter.sample(rng);
                json line{{"index", i}, {"table", tally::to_json(t)}};
                std::cout << line.dump() << "\n";
            }
        } else if (cmd_check->parsed()) {
            const auto margins = load_margins(input_path);
            copt.seed = seed;
            copt.budget = budget;
            emit(run_check(margins, copt), format);
        } else if (cmd_bench->parsed()) {
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(corpus_dir))
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    files.push_back(entry.path());
            std::sort(files.begin(), files.end());

            std::ofstream out(out_path);
            if (!out) throw std::invalid_argument("cannot open output file: " + out_path);
            // column layout is versioned; downstream tooling keys on this header
            out << "# tally benchmark v1\n";
            std::vector<std::string> cols = {"file", "N", "m", "n", "golden_flag", "linear_flag",
                                             "ln_count", "log_rho", "plain_log_est",
                                             "plain_sigma_log", "full_log_est", "full_sigma_log",
                                             "full_truncated_fraction", "error"};
            if (timings) {
                cols.push_back("plain_wall");
                cols.push_back("full_wall");
            }
            for (std::size_t i = 0; i < cols.size(); ++i)
                out << cols[i] << (i + 1 < cols.size() ? "," : "\n");
            for (const auto& f : files) {
                const json row = benchmark_row(f, seed, budget, bench_samples, bench_nu);
                for (std::size_t i = 0; i < cols.size(); ++i)
                    out << csv_quote(csv_field(row, cols[i])) << (i + 1 < cols.size() ? "," : "\n");
            }
            std::cout << json{{"instances", files.size()}, {"out", out_path}}.dump(2) << "\n";
        }
        return 0;
    } catch (const tally::budget_error& e) {
        std::cerr << "budget error: " << e.what() << "\n";
        return 2;
    } catch (const tally::convergence_error& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
