#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "tally/errors.hpp"
#include "tally/exact_count.hpp"
#include "tally/gammaln.hpp"
#include "tally/margins.hpp"
#include "tally/rng.hpp"
#include "tally/sampling.hpp"
#include "tally/scaling.hpp"

namespace tally {

enum class EstimateMethod { plain, phi_only, full };

inline const char* method_name(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::plain: return "plain";
        case EstimateMethod::phi_only: return "phi";
        case EstimateMethod::full: return "full";
    }
    return "?";
}

/// Point estimate of ln #(R,C) with its uncertainty. log_std_error is the
/// log of the linear-scale standard error of the estimate; the log-domain
/// (delta method) error is exp(log_std_error - log_estimate).
struct EstimateReport {
    EstimateMethod method = EstimateMethod::plain;
    double log_estimate = 0.0;
    double log_std_error = 0.0;
    std::int64_t samples_used = 0;
    std::optional<double> tau_log;            // ln of the truncation threshold
    std::optional<double> truncated_fraction; // fraction of p values above the threshold
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;

    double sigma_log() const { return std::exp(log_std_error - log_estimate); }
};

namespace detail {

// Log-domain moment accumulator: feeds on log-values, reports the log of
// the linear mean and the log of the standard error of that mean.
struct LogMoments {
    double log_sum = -std::numeric_limits<double>::infinity();
    double log_sum_sq = -std::numeric_limits<double>::infinity();
    std::int64_t n = 0;

    void add(double log_value) {
        log_sum = log_add(log_sum, log_value);
        log_sum_sq = log_add(log_sum_sq, 2.0 * log_value);
        ++n;
    }

    void merge(const LogMoments& o) {
        log_sum = log_add(log_sum, o.log_sum);
        log_sum_sq = log_add(log_sum_sq, o.log_sum_sq);
        n += o.n;
    }

    double log_mean() const { return log_sum - std::log(static_cast<double>(n)); }

    double log_se() const {
        if (n < 2) return std::numeric_limits<double>::infinity();
        const double ln_n = std::log(static_cast<double>(n));
        const double log_ex2 = log_sum_sq - ln_n;
        const double log_mean_sq = 2.0 * (log_sum - ln_n);
        const double log_var_pop = log_sub(log_ex2, log_mean_sq);
        const double bessel = std::log(static_cast<double>(n) / static_cast<double>(n - 1));
        return 0.5 * (log_var_pop + bessel - ln_n);
    }
};

inline constexpr std::int64_t kChunkSize = 4096;

// Evaluates `total` samples in fixed-size chunks, each chunk on its own
// derived stream, merging moments in chunk order. The result is identical
// for any worker count.
inline LogMoments chunked_log_moments(std::int64_t total, std::uint64_t master_seed,
                                      const std::function<double(Rng&)>& sample_log_value,
                                      int workers = 1) {
    const std::int64_t chunks = (total + kChunkSize - 1) / kChunkSize;
    std::vector<LogMoments> per_chunk(static_cast<std::size_t>(chunks));

    auto run_chunk = [&](std::int64_t c) {
        Rng rng = Rng::substream(master_seed, static_cast<std::uint64_t>(c));
        const std::int64_t lo = c * kChunkSize;
        const std::int64_t hi = std::min(total, lo + kChunkSize);
        LogMoments& acc = per_chunk[static_cast<std::size_t>(c)];
        for (std::int64_t k = lo; k < hi; ++k) acc.add(sample_log_value(rng));
    };

    if (workers <= 1 || chunks == 1) {
        for (std::int64_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::int64_t> next{0};
        const int nthreads = std::min<std::int64_t>(workers, chunks);
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&]() {
                for (std::int64_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1))
                    run_chunk(c);
            });
        for (auto& th : pool) th.join();
    }

    LogMoments merged;
    for (const auto& cm : per_chunk) merged.merge(cm);
    return merged;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (domain + 1));
    tally::detail::splitmix64(s);
    return tally::detail::splitmix64(s);
}

// Standard error of the mean of serially correlated log-values via batch
// means: about sqrt(n) batches, variance taken across batch averages.
inline double batch_means_log_se(const std::vector<double>& log_values) {
    const std::size_t n = log_values.size();
    if (n < 4) return std::numeric_limits<double>::infinity();
    const std::size_t batches =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
    const std::size_t width = n / batches;
    LogMoments across;
    for (std::size_t b = 0; b < batches; ++b) {
        double batch_sum = -std::numeric_limits<double>::infinity();
        for (std::size_t k = b * width; k < (b + 1) * width; ++k)
            batch_sum = log_add(batch_sum, log_values[k]);
        across.add(batch_sum - std::log(static_cast<double>(width)));
    }
    // sd of batch means over sqrt(batches)
    const double ln_b = std::log(static_cast<double>(across.n));
    const double log_ex2 = across.log_sum_sq - ln_b;
    const double log_mean_sq = 2.0 * (across.log_sum - ln_b);
    const double log_var = log_sub(log_ex2, log_mean_sq) +
                           std::log(static_cast<double>(across.n) /
                                    static_cast<double>(across.n - 1));
    return 0.5 * (log_var - ln_b);
}

} // namespace detail

/// Plain Monte Carlo over the simplex: the count is a known constant times
/// the uniform average of the block permanent. Unbiased in linear scale.
inline EstimateReport estimate_plain(const Margins& margins, std::int64_t k, std::uint64_t seed,
                                     double state_budget = kDefaultDpStateBudget, int workers = 1) {
    if (k < 1) throw std::invalid_argument("need at least one sample");
    const auto t0 = std::chrono::steady_clock::now();
    const WeightedDpPlan plan(margins, state_budget);
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();

    const std::int64_t mn = static_cast<std::int64_t>(m * n);
    double log_const = log_factorial(margins.total() + mn - 1) - log_factorial(mn - 1);
    for (auto r : margins.rows()) log_const -= log_factorial(r);
    for (auto c : margins.cols()) log_const -= log_factorial(c);

    const auto moments = detail::chunked_log_moments(
        k, seed,
        [&](Rng& rng) {
            const Matrix X = sample_simplex_uniform(m, n, rng);
            return per_block(plan, X).log();
        },
        workers);

    EstimateReport rep;
    rep.method = EstimateMethod::plain;
    rep.log_estimate = log_const + moments.log_mean();
    rep.log_std_error = log_const + moments.log_se();
    rep.samples_used = k;
    rep.seed = seed;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

struct PhiIntegral {
    double log_integral = 0.0;
    double log_std_error = 0.0;
    std::int64_t samples = 0;
};

/// Uniform-average estimate of the integral of phi over the simplex.
inline PhiIntegral estimate_phi_integral(const Margins& margins, std::int64_t k, std::uint64_t seed,
                                         double phi_tol = 1e-10, int workers = 1) {
    if (k < 1) throw std::invalid_argument("need at least one sample");
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    const auto moments = detail::chunked_log_moments(
        k, seed,
        [&](Rng& rng) {
            const Matrix X = sample_simplex_uniform(m, n, rng);
            return log_phi(X, margins, phi_tol);
        },
        workers);
    PhiIntegral out;
    out.log_integral = moments.log_mean();
    out.log_std_error = moments.log_se();
    out.samples = k;
    return out;
}

/// phi-only estimate packaged as a report (no truncation machinery).
inline EstimateReport estimate_phi_only(const Margins& margins, std::int64_t k, std::uint64_t seed,
                                        double phi_tol = 1e-10, int workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    const PhiIntegral phi = estimate_phi_integral(margins, k, seed, phi_tol, workers);
    EstimateReport rep;
    rep.method = EstimateMethod::phi_only;
    rep.log_estimate = phi.log_integral;
    rep.log_std_error = phi.log_std_error;
    rep.samples_used = k;
    rep.seed = seed;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// Full estimator: the product of the phi integral (uniform Monte Carlo)
/// and the chain average of the truncated p factor. The two factors use
/// disjoint derived streams so their errors combine independently. A
/// non-finite or negative delta_exponent disables truncation.
inline EstimateReport estimate_full(const Margins& margins, std::int64_t k_phi, std::int64_t k_nu,
                                    double delta_exponent, ChainConfig config, std::uint64_t seed,
                                    double state_budget = kDefaultDpStateBudget,
                                    double phi_tol = 1e-10, int workers = 1) {
    if (k_phi < 1 || k_nu < 1) throw std::invalid_argument("need at least one sample per factor");
    const auto t0 = std::chrono::steady_clock::now();
    check_dp_budget(margins, state_budget); // p is evaluated exactly per sample

    std::optional<double> tau_log;
    if (std::isfinite(delta_exponent) && delta_exponent >= 0.0) {
        const double lnN = std::log(static_cast<double>(margins.total()));
        tau_log = delta_exponent * lnN * lnN;
    }

    const std::uint64_t phi_seed = detail::derive_seed(seed, 1);
    const std::uint64_t nu_seed = detail::derive_seed(seed, 2);

    const PhiIntegral phi = estimate_phi_integral(margins, k_phi, phi_seed, phi_tol, workers);

    config.seed = nu_seed;
    Rng chain_rng(nu_seed);
    const NuSamples nu = sample_nu(margins, config, k_nu, chain_rng, phi_tol);
    if (static_cast<std::int64_t>(nu.samples.size()) != k_nu)
        throw convergence_error("chain produced " + std::to_string(nu.samples.size()) +
                                " of " + std::to_string(k_nu) + " requested samples");

    const WeightedDpPlan plan(margins, state_budget);
    detail::LogMoments pbar;
    std::vector<double> log_pbar_values;
    log_pbar_values.reserve(static_cast<std::size_t>(k_nu));
    std::int64_t truncated = 0;
    for (const Matrix& X : nu.samples) {
        double lp = log_p(plan, X, phi_tol).log_value;
        if (tau_log && lp > *tau_log) {
            lp = *tau_log;
            ++truncated;
        }
        pbar.add(lp);
        log_pbar_values.push_back(lp);
    }

    // chain samples are serially correlated, so the error of their mean is
    // taken from batch means rather than the iid formula
    const double log_se_p = detail::batch_means_log_se(log_pbar_values);

    EstimateReport rep;
    rep.method = EstimateMethod::full;
    rep.log_estimate = phi.log_integral + pbar.log_mean();
    const double rel_phi = std::exp(phi.log_std_error - phi.log_integral);
    const double rel_p = std::exp(log_se_p - pbar.log_mean());
    rep.log_std_error = rep.log_estimate + 0.5 * std::log(rel_phi * rel_phi + rel_p * rel_p);
    rep.samples_used = k_phi + k_nu;
    rep.tau_log = tau_log;
    rep.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(k_nu);
    rep.seed = seed;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// Comparison of an estimate against the exact count.
struct ExactComparison {
    double log_exact = 0.0;
    double log_error = 0.0; // log_estimate - ln #(R,C)
    double z = 0.0;         // log_error over the log-domain standard error
    bool pass_3sigma = false;
};

inline ExactComparison compare_to_exact(const Margins& margins, const EstimateReport& report,
                                        double state_budget = kDefaultDpStateBudget) {
    const mpz_class exact = count_tables(margins, state_budget);
    ExactComparison out;
    out.log_exact = log_mpz(exact);
    out.log_error = report.log_estimate - out.log_exact;
    const double sigma = report.sigma_log();
    if (sigma > 0.0 && std::isfinite(sigma)) {
        out.z = out.log_error / sigma;
    } else {
        out.z = out.log_error == 0.0 ? 0.0
                                     : std::copysign(std::numeric_limits<double>::infinity(),
                                                     out.log_error);
    }
    out.pass_3sigma = std::abs(out.z) <= 3.0;
    return out;
}

} // namespace tally
