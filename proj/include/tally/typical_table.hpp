#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tally/errors.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"

namespace tally {

/// Dual point of the margin-constrained entropy program. Entries live in
/// (0,1) after normalization; the table is recovered as x_i y_j/(1 - x_i y_j).
struct DualPoint {
    std::vector<double> x;
    std::vector<double> y;
};

struct TypicalTable {
    Matrix entries;     // the maximizer, strictly positive
    DualPoint dual;
    double log_rho = 0.0;   // maximum of the concave functional g
    double residual = 0.0;  // max absolute margin violation of entries

    double max_entry() const { return entries.max(); }
};

/// g(X) = sum (x+1)ln(x+1) - x ln x, with 0 ln 0 = 0.
inline double g_value(const Matrix& X) {
    double acc = 0.0;
    for (double v : X.data()) {
        if (v < 0.0) throw std::invalid_argument("g_value requires non-negative entries");
        acc += (v + 1.0) * std::log1p(v) - (v > 0.0 ? v * std::log(v) : 0.0);
    }
    return acc;
}

namespace detail {

// Given factors f_j >= 0 (not all zero), finds t in (0, 1/max f) with
//   sum_j f_j t / (1 - f_j t) = target.
// The left side is increasing and convex in t, so bracketed Newton
// converges; bisection is the safeguard.
inline double solve_dual_scalar(const std::vector<double>& factors, double target) {
    double fmax = 0.0;
    for (double f : factors) fmax = std::max(fmax, f);
    if (!(fmax > 0.0)) throw std::invalid_argument("dual scalar solve needs a positive factor");

    auto eval = [&](double t, double& h, double& dh) {
        h = 0.0;
        dh = 0.0;
        for (double f : factors) {
            const double denom = 1.0 - f * t;
            h += f * t / denom;
            dh += f / (denom * denom);
        }
    };

    double eps = 1e-9;
    double hi = (1.0 - eps) / fmax;
    double h, dh;
    eval(hi, h, dh);
    while (h < target) {
        eps *= 1e-3;
        if (eps < 1e-300) break;
        hi = (1.0 - eps) / fmax;
        eval(hi, h, dh);
    }
    double lo = 0.0;
    // h is convex, so target/h'(0) overestimates the root: a good Newton start
    double dh0 = 0.0;
    for (double f : factors) dh0 += f;
    double t = std::min(0.5 * hi, target / dh0);

    for (int iter = 0; iter < 200; ++iter) {
        eval(t, h, dh);
        if (h > target)
            hi = t;
        else
            lo = t;
        const double diff = h - target;
        if (std::abs(diff) <= 1e-14 * std::max(1.0, target)) break;
        double next = t - diff / dh;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        if (next == t) break;
        t = next;
    }
    return t;
}

} // namespace detail

/// Maximizes g over the transportation polytope by block coordinate descent
/// on the dual product representation: with y fixed every x_i solves a
/// monotone scalar equation matching row sum r_i, and symmetrically for y.
/// residual is the max absolute margin violation of the recovered table.
inline TypicalTable solve_typical(const Margins& margins, double tol = 1e-10,
                                  int max_sweeps = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    const auto& R = margins.rows();
    const auto& C = margins.cols();
    const MarginStats st = margin_stats(margins);

    // start from the symmetric point matching the average entry
    const double zeta = std::sqrt(st.s / (1.0 + st.s));
    std::vector<double> x(m, zeta), y(n, zeta);

    auto entries_of = [&](Matrix& E) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double p = x[i] * y[j];
                E(i, j) = p / (1.0 - p);
            }
    };

    Matrix E(m, n);
    double residual = std::numeric_limits<double>::infinity();
    // large margins bottom out above the absolute target on fp rounding
    // alone; a plateaued residual within tol * max margin still counts
    const double scaled_tol =
        tol * static_cast<double>(std::max(st.r_plus, st.c_plus));
    double best_residual = residual;
    int stalled_sweeps = 0;
    int sweep = 0;
    std::vector<double> factors;
    for (; sweep < max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < m; ++i) {
            factors.assign(y.begin(), y.end());
            x[i] = detail::solve_dual_scalar(factors, static_cast<double>(R[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            factors.assign(x.begin(), x.end());
            y[j] = detail::solve_dual_scalar(factors, static_cast<double>(C[j]));
        }
        // fix the scale freedom x -> x t, y -> y/t so both blocks share a maximum
        double xmax = 0.0, ymax = 0.0;
        for (double v : x) xmax = std::max(xmax, v);
        for (double v : y) ymax = std::max(ymax, v);
        const double t = std::sqrt(ymax / xmax);
        for (double& v : x) v *= t;
        for (double& v : y) v /= t;

        entries_of(E);
        residual = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) rs += E(i, j);
            residual = std::max(residual, std::abs(rs - static_cast<double>(R[i])));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) cs += E(i, j);
            residual = std::max(residual, std::abs(cs - static_cast<double>(C[j])));
        }
        if (residual <= tol) break;
        if (residual < best_residual * 0.99) {
            best_residual = residual;
            stalled_sweeps = 0;
        } else if (++stalled_sweeps >= 25 && residual <= scaled_tol) {
            break;
        }
    }
    if (residual > scaled_tol)
        throw convergence_error("typical-table solver stalled at residual " +
                                std::to_string(residual) + " after " + std::to_string(sweep) +
                                " sweeps");

    TypicalTable out;
    out.entries = E;
    out.dual = DualPoint{x, y};
    out.residual = residual;
    double lr = 0.0;
    for (std::size_t i = 0; i < m; ++i) lr -= static_cast<double>(R[i]) * std::log(x[i]);
    for (std::size_t j = 0; j < n; ++j) lr -= static_cast<double>(C[j]) * std::log(y[j]);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) lr -= std::log1p(-x[i] * y[j]);
    out.log_rho = lr;
    return out;
}

/// Log of the weighted bound: inf over positive dual points of
/// prod x_i^-r_i prod y_j^-c_j prod (1 - w_ij x_i y_j)^-1, the weighted
/// analogue of the plain bound (which is the all-ones case).
inline double log_rho_weighted(const Margins& margins, const Matrix& weights, double tol = 1e-10,
                               int max_sweeps = 100000) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    if (weights.rows() != m || weights.cols() != n)
        throw std::invalid_argument("weight matrix shape does not match margins");
    for (double w : weights.data())
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("weights must be finite and non-negative");
    for (std::size_t i = 0; i < m; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < n; ++j) any = any || weights(i, j) > 0.0;
        if (!any) throw std::invalid_argument("weight matrix has an all-zero row");
    }
    for (std::size_t j = 0; j < n; ++j) {
        bool any = false;
        for (std::size_t i = 0; i < m; ++i) any = any || weights(i, j) > 0.0;
        if (!any) throw std::invalid_argument("weight matrix has an all-zero column");
    }

    const auto& R = margins.rows();
    const auto& C = margins.cols();
    const MarginStats st = margin_stats(margins);
    const double zeta = std::sqrt(st.s / (1.0 + st.s));
    const double wmax = weights.max();
    std::vector<double> x(m, zeta / std::sqrt(wmax)), y(n, zeta / std::sqrt(wmax));

    double residual = std::numeric_limits<double>::infinity();
    const double scaled_tol = tol * static_cast<double>(std::max(st.r_plus, st.c_plus));
    double best_residual = residual;
    int stalled_sweeps = 0;
    std::vector<double> factors;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < m; ++i) {
            factors.clear();
            for (std::size_t j = 0; j < n; ++j) factors.push_back(weights(i, j) * y[j]);
            x[i] = detail::solve_dual_scalar(factors, static_cast<double>(R[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            factors.clear();
            for (std::size_t i = 0; i < m; ++i) factors.push_back(weights(i, j) * x[i]);
            y[j] = detail::solve_dual_scalar(factors, static_cast<double>(C[j]));
        }
        double xmax = 0.0, ymax = 0.0;
        for (double v : x) xmax = std::max(xmax, v);
        for (double v : y) ymax = std::max(ymax, v);
        const double t = std::sqrt(ymax / xmax);
        for (double& v : x) v *= t;
        for (double& v : y) v /= t;

        residual = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p = weights(i, j) * x[i] * y[j];
                rs += p / (1.0 - p);
            }
            residual = std::max(residual, std::abs(rs - static_cast<double>(R[i])));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double p = weights(i, j) * x[i] * y[j];
                cs += p / (1.0 - p);
            }
            residual = std::max(residual, std::abs(cs - static_cast<double>(C[j])));
        }
        if (residual <= tol) break;
        if (residual < best_residual * 0.99) {
            best_residual = residual;
            stalled_sweeps = 0;
        } else if (++stalled_sweeps >= 25 && residual <= scaled_tol) {
            break;
        }
    }
    if (residual > scaled_tol)
        throw convergence_error("weighted dual solver stalled at residual " +
                                std::to_string(residual));

    double lr = 0.0;
    for (std::size_t i = 0; i < m; ++i) lr -= static_cast<double>(R[i]) * std::log(x[i]);
    for (std::size_t j = 0; j < n; ++j) lr -= static_cast<double>(C[j]) * std::log(y[j]);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) lr -= std::log1p(-weights(i, j) * x[i] * y[j]);
    return lr;
}

/// Smoothness classification against a solved typical table.
inline SmoothnessReport classify_smoothness(const Margins& margins, const TypicalTable& typical,
                                            const SmoothnessParams& params) {
    return classify_smoothness(margins, params, typical.max_entry());
}

} // namespace tally
