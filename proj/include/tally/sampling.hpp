#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "tally/errors.hpp"
#include "tally/exact_count.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/rng.hpp"
#include "tally/scaling.hpp"

namespace tally {

/// Exact uniform (Lebesgue) sample from the open unit-sum simplex of
/// m x n positive matrices: normalized independent exponentials.
inline Matrix sample_simplex_uniform(std::size_t m, std::size_t n, Rng& rng) {
    Matrix X(m, n);
    double total = 0.0;
    for (double& v : X.data()) {
        v = rng.exponential();
        total += v;
    }
    for (double& v : X.data()) v /= total;
    return X;
}

struct PsiSample {
    Matrix X;    // strictly positive
    Table table; // latent table behind the draw
};

/// Exact sampler for the mixture density on the positive orthant whose
/// component for table D is the product of Gamma(d_ij + 1) densities:
/// draw D uniformly, then each entry from its Gamma. No MCMC involved.
class PsiSampler {
public:
    explicit PsiSampler(const Margins& margins, double state_budget = kDefaultDpStateBudget)
        : counter_(margins, state_budget, false) {
        counter_.count();
    }

    PsiSample sample(Rng& rng) {
        PsiSample out;
        out.table = counter_.sample(rng);
        out.X = Matrix(out.table.rows(), out.table.cols());
        for (std::size_t k = 0; k < out.X.size(); ++k)
            out.X.data()[k] = rng.gamma_int_shape(out.table.data()[k] + 1);
        return out;
    }

    const Margins& margins() const { return counter_.margins(); }

private:
    TableCounter counter_;
};

inline PsiSample sample_psi(const Margins& margins, Rng& rng,
                            double state_budget = kDefaultDpStateBudget) {
    PsiSampler sampler(margins, state_budget);
    return sampler.sample(rng);
}

struct ChainConfig {
    std::int64_t burn_in = 1000;
    std::int64_t thinning = 10;
    double delta_interior = 0.0; // 0 picks the default below
    std::int64_t step_count = 0; // optional hard cap on total steps; 0 = no cap
    std::uint64_t seed = 0;
};

/// Default interior margin for the chain. The excluded boundary mass is
/// bounded by roughly (N+mn) * mn * delta, and because p grows toward the
/// boundary that exclusion biases the chain average of p downward; the
/// divisor keeps the deficit near 1e-4, well under the Monte Carlo noise
/// floor at desk-scale sample counts.
inline double default_delta_interior(const Margins& margins) {
    const double mn = static_cast<double>(margins.row_count() * margins.col_count());
    const double N = static_cast<double>(margins.total());
    return 1.0 / (mn * (N + mn) * 1e4);
}

struct NuSamples {
    std::vector<Matrix> samples;
    double acceptance_rate = 0.0;
    std::int64_t restarts = 0;
    std::int64_t steps = 0;
    double delta_interior = 0.0;
};

/// Hit-and-run Metropolis chain on the delta-interior of the simplex with
/// stationary density proportional to phi. Proposals are uniform on the
/// chord through the current point, so the acceptance ratio is the plain
/// phi ratio. Samples are approximately distributed; no total-variation
/// guarantee is claimed.
inline NuSamples sample_nu(const Margins& margins, const ChainConfig& config, std::int64_t count,
                           Rng& rng, double phi_tol = 1e-10) {
    if (config.burn_in < 0 || config.thinning < 1)
        throw std::invalid_argument("chain config: burn_in >= 0 and thinning >= 1 required");
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    const std::size_t mn = m * n;
    const double delta =
        config.delta_interior > 0.0 ? config.delta_interior : default_delta_interior(margins);
    if (!(delta > 0.0) || !(delta < 1.0 / static_cast<double>(mn)))
        throw std::invalid_argument("delta_interior must lie in (0, 1/(mn))");

    NuSamples out;
    out.delta_interior = delta;
    if (mn == 1) {
        // zero-dimensional simplex: the chain is the single point
        out.samples.assign(static_cast<std::size_t>(count), Matrix(1, 1, 1.0));
        out.acceptance_rate = 1.0;
        return out;
    }

    Matrix X(m, n, 1.0 / static_cast<double>(mn));
    double log_phi_cur = log_phi(X, margins, phi_tol);
    std::int64_t accepted = 0, proposals = 0;
    const std::int64_t total_steps = config.burn_in + count * config.thinning;

    std::vector<double> dir(mn);
    for (std::int64_t step = 0; step < total_steps; ++step) {
        if (config.step_count > 0 && step >= config.step_count) break;

        // zero-sum random direction
        double mean = 0.0;
        for (double& d : dir) {
            d = rng.normal();
            mean += d;
        }
        mean /= static_cast<double>(mn);
        double norm = 0.0;
        for (double& d : dir) {
            d -= mean;
            norm += d * d;
        }
        norm = std::sqrt(norm);

        if (norm > 0.0) {
            for (double& d : dir) d /= norm;

            // chord of the delta-interior along the direction
            double t_lo = -std::numeric_limits<double>::infinity();
            double t_hi = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < mn; ++k) {
                const double u = dir[k];
                const double x = X.data()[k];
                if (u > 0.0)
                    t_lo = std::max(t_lo, (delta - x) / u);
                else if (u < 0.0)
                    t_hi = std::min(t_hi, (delta - x) / u);
            }
            if (!(t_hi - t_lo > 1e-14)) {
                // degenerate chord; restart from the barycenter
                X = Matrix(m, n, 1.0 / static_cast<double>(mn));
                log_phi_cur = log_phi(X, margins, phi_tol);
                ++out.restarts;
            } else {
                const double t = rng.uniform(t_lo, t_hi);
                Matrix prop = X;
                for (std::size_t k = 0; k < mn; ++k) prop.data()[k] += t * dir[k];
                // keep the exact sum-1 invariant against fp drift
                const double psum = prop.sum();
                for (double& v : prop.data()) v /= psum;

                ++proposals;
                const double log_phi_prop = log_phi(prop, margins, phi_tol);
                if (std::log(rng.uniform01()) < log_phi_prop - log_phi_cur) {
                    X = prop;
                    log_phi_cur = log_phi_prop;
                    ++accepted;
                }
            }
        }
        ++out.steps;

        // the chain emits on schedule whether or not it moved
        const std::int64_t past_burn = step - config.burn_in + 1;
        if (past_burn > 0 && past_burn % config.thinning == 0 &&
            out.samples.size() < static_cast<std::size_t>(count))
            out.samples.push_back(X);
    }
    out.acceptance_rate = proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
    return out;
}

/// Empirical checks of the tail facts about the exact mixture density.
struct TailChecks {
    std::int64_t samples = 0;

    // frequency of sum x >= 2(N + mn), against the (3/4)^(N+mn) ceiling
    double freq_sum_exceeds = 0.0;
    double ceiling = 0.0;
    std::int64_t exceed_count = 0;

    // optional distribution diagnostics for log p under the mixture
    bool has_p_stats = false;
    double mean_log_p = 0.0;
    double max_log_p = 0.0;
    double frac_log_p_above = 0.0;
    double log_p_threshold = 0.0;

    // optional exponential-moment identity: E exp(sum lambda_ij x_ij)
    // equals T(R,C;W)/#(R,C) * prod w_ij with w = 1/(1-lambda)
    bool has_moment_check = false;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    double exact_value = 0.0;
    double z = 0.0;
};

inline TailChecks empirical_tail_checks(const Margins& margins, std::int64_t samples, Rng& rng,
                                        const Matrix* lambda = nullptr,
                                        std::optional<double> log_p_threshold = std::nullopt,
                                        double state_budget = kDefaultDpStateBudget) {
    if (samples < 1) throw std::invalid_argument("need at least one sample");
    PsiSampler sampler(margins, state_budget);
    const double heavy = 2.0 * static_cast<double>(margins.total() +
                                                   static_cast<std::int64_t>(margins.row_count() *
                                                                             margins.col_count()));

    TailChecks out;
    out.samples = samples;
    out.ceiling = std::pow(0.75, static_cast<double>(margins.total()) +
                                     static_cast<double>(margins.row_count() * margins.col_count()));

    std::optional<WeightedDpPlan> plan;
    if (log_p_threshold) {
        plan.emplace(margins, state_budget);
        out.has_p_stats = true;
        out.log_p_threshold = *log_p_threshold;
        out.max_log_p = -std::numeric_limits<double>::infinity();
    }
    if (lambda) {
        if (lambda->rows() != margins.row_count() || lambda->cols() != margins.col_count())
            throw std::invalid_argument("lambda matrix shape does not match margins");
        for (double lam : lambda->data())
            if (!(lam < 1.0)) throw std::invalid_argument("lambda entries must be < 1");
        out.has_moment_check = true;
    }

    long double moment_sum = 0.0L, moment_sq = 0.0L;
    long double logp_sum = 0.0L;
    std::int64_t logp_above = 0;
    for (std::int64_t k = 0; k < samples; ++k) {
        const PsiSample ps = sampler.sample(rng);
        if (ps.X.sum() >= heavy) ++out.exceed_count;
        if (lambda) {
            double e = 0.0;
            for (std::size_t idx = 0; idx < ps.X.size(); ++idx)
                e += lambda->data()[idx] * ps.X.data()[idx];
            const long double v = std::exp(static_cast<long double>(e));
            moment_sum += v;
            moment_sq += v * v;
        }
        if (plan) {
            const PFactor p = log_p(*plan, ps.X);
            logp_sum += p.log_value;
            out.max_log_p = std::max(out.max_log_p, p.log_value);
            if (p.log_value > *log_p_threshold) ++logp_above;
        }
    }
    out.freq_sum_exceeds = static_cast<double>(out.exceed_count) / static_cast<double>(samples);

    if (lambda) {
        const long double mean = moment_sum / static_cast<long double>(samples);
        const long double var =
            (moment_sq / static_cast<long double>(samples) - mean * mean) /
            static_cast<long double>(samples > 1 ? samples - 1 : 1);
        out.mc_mean = static_cast<double>(mean);
        out.mc_se = static_cast<double>(std::sqrt(std::max(0.0L, var)));

        Matrix W(margins.row_count(), margins.col_count());
        double log_prod_w = 0.0;
        for (std::size_t idx = 0; idx < W.size(); ++idx) {
            W.data()[idx] = 1.0 / (1.0 - lambda->data()[idx]);
            log_prod_w += std::log(W.data()[idx]);
        }
        const LogReal T = count_weighted(margins, W, state_budget);
        const mpz_class total = count_tables(margins, state_budget);
        out.exact_value = std::exp(T.log() - log_mpz(total) + log_prod_w);
        out.z = out.mc_se > 0.0 ? (out.mc_mean - out.exact_value) / out.mc_se : 0.0;
    }
    if (plan) {
        out.mean_log_p = static_cast<double>(logp_sum / static_cast<long double>(samples));
        out.frac_log_p_above = static_cast<double>(logp_above) / static_cast<double>(samples);
    }
    return out;
}

} // namespace tally
