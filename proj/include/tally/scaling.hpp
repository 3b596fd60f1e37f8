#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tally/errors.hpp"
#include "tally/exact_count.hpp"
#include "tally/gammaln.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/rng.hpp"

namespace tally {

/// Result of scaling a positive matrix X to prescribed margins:
/// x_ij = y_ij * lambda_i * mu_j, with lambda_1 fixed to 1 to pin the
/// rescaling freedom.
struct ScalingResult {
    Matrix Y;
    std::vector<double> lambda;
    std::vector<double> mu;
    int iterations = 0;
    double residual = 0.0; // max relative margin violation of Y
};

/// Alternating row/column normalization. Positive input always converges;
/// the iteration cap only guards unreasonable tolerances.
inline ScalingResult sinkhorn(const Matrix& X, const Margins& margins, double tol = 1e-10,
                              int max_iter = 100000) {
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    if (X.rows() != m || X.cols() != n)
        throw std::invalid_argument("matrix shape does not match margins");
    if (!X.all_positive()) throw std::invalid_argument("sinkhorn requires a strictly positive matrix");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");

    const auto& R = margins.rows();
    const auto& C = margins.cols();
    std::vector<double> a(m, 1.0), b(n, 1.0); // Y = diag(a) X diag(b)

    auto residual_of = [&]() {
        double res = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) rs += a[i] * X(i, j) * b[j];
            res = std::max(res, std::abs(rs - static_cast<double>(R[i])) / static_cast<double>(R[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) cs += a[i] * X(i, j) * b[j];
            res = std::max(res, std::abs(cs - static_cast<double>(C[j])) / static_cast<double>(C[j]));
        }
        return res;
    };

    int it = 0;
    double res = residual_of();
    while (res > tol && it < max_iter) {
        for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) rs += X(i, j) * b[j];
            a[i] = static_cast<double>(R[i]) / rs;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) cs += a[i] * X(i, j);
            b[j] = static_cast<double>(C[j]) / cs;
        }
        ++it;
        res = residual_of();
    }
    if (res > tol)
        throw convergence_error("sinkhorn stalled at residual " + std::to_string(res) + " after " +
                                std::to_string(it) + " sweeps");

    ScalingResult out;
    out.Y = Matrix(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.Y(i, j) = a[i] * X(i, j) * b[j];
    out.lambda.resize(m);
    out.mu.resize(n);
    for (std::size_t i = 0; i < m; ++i) out.lambda[i] = 1.0 / a[i];
    for (std::size_t j = 0; j < n; ++j) out.mu[j] = 1.0 / b[j];
    // pin the scale: lambda_1 = 1
    const double t = out.lambda[0];
    for (double& v : out.lambda) v /= t;
    for (double& v : out.mu) v *= t;
    out.iterations = it;
    out.residual = res;
    return out;
}

/// log of the capacity-style factor
///   phi(X) = (N+mn-1)! N! / ((mn-1)! N^N) * prod r_i^{r_i}/r_i!
///            * prod c_j^{c_j}/c_j! * prod lambda_i^{r_i} * prod mu_j^{c_j},
/// with the multipliers taken from the scaling of X to the margins. X is
/// projected onto the unit-sum simplex first, which makes the value
/// invariant under positive rescaling of X.
inline double log_phi(const Matrix& X, const Margins& margins, double tol = 1e-10) {
    const double total = X.sum();
    if (!(total > 0.0)) throw std::invalid_argument("log_phi requires a positive matrix");
    const Matrix Xn = X.scaled(1.0 / total);
    const ScalingResult sc = sinkhorn(Xn, margins, tol);

    const double N = static_cast<double>(margins.total());
    const double mn = static_cast<double>(margins.row_count() * margins.col_count());
    double lg = log_factorial(margins.total() + static_cast<std::int64_t>(mn) - 1) -
                log_factorial(static_cast<std::int64_t>(mn) - 1) + log_factorial(margins.total()) -
                N * std::log(N);
    for (auto r : margins.rows()) {
        lg += static_cast<double>(r) * std::log(static_cast<double>(r)) - log_factorial(r);
    }
    for (auto c : margins.cols()) {
        lg += static_cast<double>(c) * std::log(static_cast<double>(c)) - log_factorial(c);
    }
    for (std::size_t i = 0; i < sc.lambda.size(); ++i)
        lg += static_cast<double>(margins.rows()[i]) * std::log(sc.lambda[i]);
    for (std::size_t j = 0; j < sc.mu.size(); ++j)
        lg += static_cast<double>(margins.cols()[j]) * std::log(sc.mu[j]);
    return lg;
}

/// log of the residual permanent factor p, point or interval valued.
struct PFactor {
    double log_value = 0.0; // meaningful when !is_bracket
    bool is_bracket = false;
    double log_lo = 0.0;
    double log_hi = 0.0;
};

/// log of the upper bound on p from the margin factorials alone:
///   p <= N^N/N! * min(prod r_i!/r_i^{r_i}, prod c_j!/c_j^{c_j}).
inline double p_upper_bound(const Margins& margins) {
    const double N = static_cast<double>(margins.total());
    double row_part = 0.0, col_part = 0.0;
    for (auto r : margins.rows())
        row_part += log_factorial(r) - static_cast<double>(r) * std::log(static_cast<double>(r));
    for (auto c : margins.cols())
        col_part += log_factorial(c) - static_cast<double>(c) * std::log(static_cast<double>(c));
    return N * std::log(N) - log_factorial(margins.total()) + std::min(row_part, col_part);
}

struct PermanentBracket {
    double log_lower = 0.0;
    double log_upper = 0.0;
};

/// Bracket for the permanent of a doubly stochastic N x N matrix from its
/// row maxima z_i: the lower end is N!/N^N and the upper end is
/// (tau/N)^N Gamma(1 + N/tau)^tau for tau = sum z_i >= 1.
inline PermanentBracket permanent_bracket(std::span<const double> row_maxima) {
    const std::size_t N = row_maxima.size();
    if (N == 0) throw std::invalid_argument("permanent_bracket needs at least one row");
    double tau = 0.0;
    for (double z : row_maxima) {
        if (!(z > 0.0)) throw std::invalid_argument("row maxima must be positive");
        tau += z;
    }
    if (tau < 1.0 - 1e-12)
        throw std::invalid_argument("sum of row maxima must be at least 1");
    tau = std::max(tau, 1.0);
    const double Nd = static_cast<double>(N);
    PermanentBracket out;
    out.log_lower = log_factorial(static_cast<std::int64_t>(N)) - Nd * std::log(Nd);
    out.log_upper = Nd * std::log(tau / Nd) + tau * gamma_ln(1.0 + Nd / tau);
    return out;
}

/// Doubly stochastic matrix obtained by dividing the (i,j) block of the
/// block matrix by r_i c_j lambda_i mu_j; entries are y_ij / (r_i c_j).
inline Matrix doubly_stochastic_block(const ScalingResult& sc, const Margins& margins) {
    const std::size_t N = static_cast<std::size_t>(margins.total());
    Matrix B(N, N);
    std::size_t row0 = 0;
    for (std::size_t i = 0; i < margins.row_count(); ++i) {
        std::size_t col0 = 0;
        for (std::size_t j = 0; j < margins.col_count(); ++j) {
            const double v = sc.Y(i, j) /
                             (static_cast<double>(margins.rows()[i]) * static_cast<double>(margins.cols()[j]));
            for (std::size_t a = 0; a < static_cast<std::size_t>(margins.rows()[i]); ++a)
                for (std::size_t b = 0; b < static_cast<std::size_t>(margins.cols()[j]); ++b)
                    B(row0 + a, col0 + b) = v;
            col0 += static_cast<std::size_t>(margins.cols()[j]);
        }
        row0 += static_cast<std::size_t>(margins.rows()[i]);
    }
    return B;
}

/// log p(X) = N ln N - ln N! + ln per A(X)
///            - sum r_i ln(lambda_i r_i) - sum c_j ln(mu_j c_j),
/// exact through the block-permanent DP. Above the DP budget the value
/// degrades to the doubly-stochastic permanent bracket, never to an
/// unquantified estimate.
inline PFactor log_p(const Matrix& X, const Margins& margins, double tol = 1e-10,
                     double state_budget = kDefaultDpStateBudget) {
    const double total = X.sum();
    if (!(total > 0.0) || !X.all_positive())
        throw std::invalid_argument("log_p requires a strictly positive matrix");
    const Matrix Xn = X.scaled(1.0 / total);
    const ScalingResult sc = sinkhorn(Xn, margins, tol);

    const double N = static_cast<double>(margins.total());
    PFactor out;
    if (dp_state_bound(margins) <= state_budget) {
        const LogReal perA = per_block(margins, Xn, state_budget);
        double lg = N * std::log(N) - log_factorial(margins.total()) + perA.log();
        for (std::size_t i = 0; i < margins.row_count(); ++i)
            lg -= static_cast<double>(margins.rows()[i]) *
                  std::log(sc.lambda[i] * static_cast<double>(margins.rows()[i]));
        for (std::size_t j = 0; j < margins.col_count(); ++j)
            lg -= static_cast<double>(margins.cols()[j]) *
                  std::log(sc.mu[j] * static_cast<double>(margins.cols()[j]));
        out.log_value = lg;
        return out;
    }

    // interval fallback from the row maxima of the doubly stochastic block
    std::vector<double> zmax;
    zmax.reserve(static_cast<std::size_t>(margins.total()));
    for (std::size_t i = 0; i < margins.row_count(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < margins.col_count(); ++j)
            z = std::max(z, sc.Y(i, j) / (static_cast<double>(margins.rows()[i]) *
                                          static_cast<double>(margins.cols()[j])));
        for (std::int64_t rep = 0; rep < margins.rows()[i]; ++rep) zmax.push_back(z);
    }
    const PermanentBracket br = permanent_bracket(zmax);
    out.is_bracket = true;
    out.log_lo = 0.0; // p >= 1 always
    const double shift = N * std::log(N) - log_factorial(margins.total());
    out.log_hi = std::min(shift + br.log_upper, p_upper_bound(margins));
    out.log_value = 0.5 * (out.log_lo + out.log_hi);
    return out;
}

/// Same, reusing a prebuilt DP plan; the hot path for per-sample p values.
inline PFactor log_p(const WeightedDpPlan& plan, const Matrix& X, double tol = 1e-10) {
    const Margins& margins = plan.margins();
    const double total = X.sum();
    if (!(total > 0.0) || !X.all_positive())
        throw std::invalid_argument("log_p requires a strictly positive matrix");
    const Matrix Xn = X.scaled(1.0 / total);
    const ScalingResult sc = sinkhorn(Xn, margins, tol);
    const double N = static_cast<double>(margins.total());
    const LogReal perA = per_block(plan, Xn);
    double lg = N * std::log(N) - log_factorial(margins.total()) + perA.log();
    for (std::size_t i = 0; i < margins.row_count(); ++i)
        lg -= static_cast<double>(margins.rows()[i]) *
              std::log(sc.lambda[i] * static_cast<double>(margins.rows()[i]));
    for (std::size_t j = 0; j < margins.col_count(); ++j)
        lg -= static_cast<double>(margins.cols()[j]) *
              std::log(sc.mu[j] * static_cast<double>(margins.cols()[j]));
    PFactor out;
    out.log_value = lg;
    return out;
}

/// Consistency report for the factorization f = p * phi, with log f
/// computed independently from the block permanent.
struct FactorReport {
    double log_phi = 0.0;
    double log_p = 0.0;
    double log_f = 0.0;
    double consistency_gap = 0.0;
};

inline FactorReport factor_report(const Matrix& X, const Margins& margins, double tol = 1e-10,
                                  double state_budget = kDefaultDpStateBudget) {
    const double total = X.sum();
    if (!(total > 0.0)) throw std::invalid_argument("factor_report requires a positive matrix");
    const Matrix Xn = X.scaled(1.0 / total);

    FactorReport rep;
    rep.log_phi = log_phi(Xn, margins, tol);
    const PFactor p = log_p(Xn, margins, tol, state_budget);
    if (p.is_bracket) throw budget_error("factor_report needs the exact permanent path");
    rep.log_p = p.log_value;

    const std::int64_t mn = static_cast<std::int64_t>(margins.row_count() * margins.col_count());
    double lf = log_factorial(margins.total() + mn - 1) - log_factorial(mn - 1) +
                per_block(margins, Xn, state_budget).log();
    for (auto r : margins.rows()) lf -= log_factorial(r);
    for (auto c : margins.cols()) lf -= log_factorial(c);
    rep.log_f = lf;
    rep.consistency_gap = std::abs(rep.log_f - (rep.log_phi + rep.log_p));
    return rep;
}

/// Per-cell check of the scaled-entry bound: for the scaling Y of X,
///   ln y_pq <= ln(r_p c_q / N) + ln x_pq + ln((1/N^2) sum r_i c_j x_ij)
///              - (1/N) sum_j c_j ln x_pj - (1/N) sum_i r_i ln x_iq + slack.
struct CellCheckReport {
    std::vector<std::vector<bool>> pass;
    double max_violation = 0.0; // positive means a cell failed by that much
    bool all_pass = true;
};

inline CellCheckReport scaled_entry_bound_report(const Matrix& X, const Margins& margins,
                                                 double tol = 1e-10, double slack = 1e-8) {
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    const ScalingResult sc = sinkhorn(X, margins, tol);
    const auto& R = margins.rows();
    const auto& C = margins.cols();
    const double N = static_cast<double>(margins.total());

    double mixed = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            mixed += static_cast<double>(R[i]) * static_cast<double>(C[j]) * X(i, j);
    const double log_mixed = std::log(mixed / (N * N));

    std::vector<double> row_avg(m, 0.0), col_avg(n, 0.0);
    for (std::size_t p = 0; p < m; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(C[j]) * std::log(X(p, j));
        row_avg[p] = acc / N;
    }
    for (std::size_t q = 0; q < n; ++q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(R[i]) * std::log(X(i, q));
        col_avg[q] = acc / N;
    }

    CellCheckReport rep;
    rep.pass.assign(m, std::vector<bool>(n, true));
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            const double rhs = std::log(static_cast<double>(R[p]) * static_cast<double>(C[q]) / N) +
                               std::log(X(p, q)) + log_mixed - row_avg[p] - col_avg[q];
            const double gap = std::log(sc.Y(p, q)) - rhs;
            rep.max_violation = std::max(rep.max_violation, gap);
            if (gap > slack) {
                rep.pass[p][q] = false;
                rep.all_pass = false;
            }
        }
    return rep;
}

/// Variational facts about the scaling Y of X:
///  (a) Y minimizes sum z (ln z - ln x) over the transportation polytope,
///      probed with random polytope points;
///  (b) with X normalized to total N, sum r_i c_j ln y_ij >= sum r_i c_j ln x_ij.
struct VariationalReport {
    double min_trial_gap = 0.0; // min over trials of f(Z) - f(Y); >= -slack when ok
    bool entropy_min_ok = true;
    double weighted_log_gap = 0.0; // lhs - rhs of (b)
    bool weighted_log_ok = true;
    int trials = 0;
};

inline VariationalReport variational_reports(const Matrix& X, const Margins& margins, int trials,
                                             Rng& rng, double tol = 1e-10, double slack = 1e-8,
                                             double state_budget = kDefaultDpStateBudget) {
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    const ScalingResult sc = sinkhorn(X, margins, tol);

    auto kl_to_x = [&](const Matrix& Z) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double z = Z(i, j);
                if (z > 0.0) acc += z * (std::log(z) - std::log(X(i, j)));
            }
        return acc;
    };

    VariationalReport rep;
    rep.trials = trials;
    const double fY = kl_to_x(sc.Y);

    TableCounter counter(margins, state_budget, false);
    counter.count();
    rep.min_trial_gap = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        // random point of the polytope: convex mix of a few uniform tables
        const int k = 2 + static_cast<int>(rng.uniform_index(3));
        std::vector<double> w(static_cast<std::size_t>(k));
        double wsum = 0.0;
        for (double& v : w) {
            v = rng.exponential();
            wsum += v;
        }
        Matrix Z(m, n, 0.0);
        for (int c = 0; c < k; ++c) {
            const Table tab = counter.sample(rng);
            for (std::size_t idx = 0; idx < Z.size(); ++idx)
                Z.data()[idx] += (w[static_cast<std::size_t>(c)] / wsum) *
                                 static_cast<double>(tab.data()[idx]);
        }
        const double gap = kl_to_x(Z) - fY;
        rep.min_trial_gap = std::min(rep.min_trial_gap, gap);
    }
    rep.entropy_min_ok = rep.min_trial_gap >= -slack;

    const double total = X.sum();
    const Matrix Xn = X.scaled(static_cast<double>(margins.total()) / total);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double rc = static_cast<double>(margins.rows()[i]) *
                              static_cast<double>(margins.cols()[j]);
            lhs += rc * std::log(sc.Y(i, j));
            rhs += rc * std::log(Xn(i, j));
        }
    rep.weighted_log_gap = lhs - rhs;
    rep.weighted_log_ok = rep.weighted_log_gap >= -slack;
    return rep;
}

} // namespace tally
