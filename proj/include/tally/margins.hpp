#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <gmpxx.h>

namespace tally {

/// Prescribed row and column sums. Both vectors are positive and share the
/// same total; that common total is N throughout the library.
class Margins {
public:
    Margins(std::vector<std::int64_t> rows, std::vector<std::int64_t> cols)
        : rows_(std::move(rows)), cols_(std::move(cols)) {
        if (rows_.empty() || cols_.empty())
            throw std::invalid_argument("margins must have at least one row and one column");
        std::int64_t rsum = 0, csum = 0;
        for (auto r : rows_) {
            if (r < 1) throw std::invalid_argument("row sums must be positive integers");
            rsum += r;
        }
        for (auto c : cols_) {
            if (c < 1) throw std::invalid_argument("column sums must be positive integers");
            csum += c;
        }
        if (rsum != csum)
            throw std::invalid_argument("inconsistent-margins: row total differs from column total");
        total_ = rsum;
    }

    const std::vector<std::int64_t>& rows() const { return rows_; }
    const std::vector<std::int64_t>& cols() const { return cols_; }
    std::int64_t total() const { return total_; }
    std::size_t row_count() const { return rows_.size(); }
    std::size_t col_count() const { return cols_.size(); }

    Margins transposed() const { return Margins(cols_, rows_); }

private:
    std::vector<std::int64_t> rows_;
    std::vector<std::int64_t> cols_;
    std::int64_t total_ = 0;
};

struct MarginStats {
    std::int64_t N = 0;
    std::int64_t m = 0;
    std::int64_t n = 0;
    double s = 0.0; // average table entry N/(m n)
    std::int64_t r_plus = 0;
    std::int64_t r_minus = 0;
    std::int64_t c_plus = 0;
    std::int64_t c_minus = 0;
};

inline MarginStats margin_stats(const Margins& margins) {
    MarginStats st;
    st.N = margins.total();
    st.m = static_cast<std::int64_t>(margins.row_count());
    st.n = static_cast<std::int64_t>(margins.col_count());
    auto [rmin, rmax] = std::minmax_element(margins.rows().begin(), margins.rows().end());
    auto [cmin, cmax] = std::minmax_element(margins.cols().begin(), margins.cols().end());
    st.r_minus = *rmin;
    st.r_plus = *rmax;
    st.c_minus = *cmin;
    st.c_plus = *cmax;
    // exact rational, then one rounding to double
    mpq_class s(st.N, st.m * st.n);
    s.canonicalize();
    st.s = s.get_d();
    return st;
}

struct SmoothnessParams {
    double golden_rho = 1.0;
    double golden_eps = 0.1;
    double linear_beta = 1.0;
    double linear_eps = 0.5;
};

struct SmoothnessReport {
    double alpha_min_upper = 0.0;   // smallest alpha with r+ <= alpha N/m and c+ <= alpha N/n
    double beta_max_lower = 0.0;    // largest beta with r- >= beta N/m and c- >= beta N/n
    std::optional<double> strong_alpha; // max entry of the supplied typical table over s
    double moderate_s0 = 0.0;       // = s
    bool golden_flag = false;
    bool linear_flag = false;
};

/// Classifies margins against the parameterized smoothness families. All
/// ratio comparisons run in exact rational arithmetic so the flags are
/// never subject to floating-point boundary noise.
inline SmoothnessReport classify_smoothness(const Margins& margins,
                                            const SmoothnessParams& params,
                                            std::optional<double> typical_max_entry = std::nullopt) {
    if (!(params.golden_rho > 0.0) || !(params.linear_beta > 0.0) || !(params.linear_eps > 0.0))
        throw std::invalid_argument("smoothness parameters must be positive");
    if (!(params.golden_eps > 0.0) || !(params.golden_eps < 1.0))
        throw std::invalid_argument("golden_eps must lie in (0,1)");

    const MarginStats st = margin_stats(margins);
    SmoothnessReport rep;
    rep.moderate_s0 = st.s;

    const mpq_class N(st.N), m(st.m), n(st.n);
    const mpq_class alpha_rows = mpq_class(st.r_plus * st.m, st.N);
    const mpq_class alpha_cols = mpq_class(st.c_plus * st.n, st.N);
    rep.alpha_min_upper = mpq_class(std::max(alpha_rows, alpha_cols)).get_d();
    const mpq_class beta_rows = mpq_class(st.r_minus * st.m, st.N);
    const mpq_class beta_cols = mpq_class(st.c_minus * st.n, st.N);
    rep.beta_max_lower = mpq_class(std::min(beta_rows, beta_cols)).get_d();

    if (typical_max_entry) {
        // smallest alpha with max_ij x*_ij <= alpha s; s > 0 always
        rep.strong_alpha = *typical_max_entry / st.s;
    }

    // golden family: dimensions within rho of each other, and
    // beta1 beta2 <= max(beta1, beta2) + 1 - eps for the margin spread ratios
    {
        const mpq_class rho(params.golden_rho);
        const mpq_class eps(params.golden_eps);
        const mpq_class beta1(st.r_plus, st.r_minus);
        const mpq_class beta2(st.c_plus, st.c_minus);
        const bool dims_ok = (m <= rho * n) && (n <= rho * m);
        const mpq_class rhs = std::max(beta1, beta2) + 1 - eps;
        rep.golden_flag = dims_ok && (beta1 * beta2 <= rhs);
    }

    // linear family: bounded row spread and columns small next to m,
    // meaningful only when eps*beta < 1
    {
        const mpq_class beta(params.linear_beta);
        const mpq_class eps(params.linear_eps);
        const bool param_ok = eps * beta < 1;
        const bool spread_ok = mpq_class(st.r_plus, st.r_minus) <= beta;
        const bool col_ok = mpq_class(st.c_plus) <= eps * m;
        rep.linear_flag = param_ok && spread_ok && col_ok;
    }

    return rep;
}

struct EntryBounds {
    double lower = 0.0;
    std::optional<double> upper;
};

/// Entrywise bounds on the typical table from the margin statistics alone.
/// The lower bound always applies; an upper bound exists only when one of
/// the two sufficient conditions holds, and the tighter one is reported.
inline EntryBounds typical_entry_bounds(const Margins& margins) {
    const MarginStats st = margin_stats(margins);
    EntryBounds out;

    const mpq_class low1(st.r_minus * st.c_minus, st.r_plus * st.m);
    const mpq_class low2(st.c_minus * st.r_minus, st.c_plus * st.n);
    out.lower = mpq_class(std::max(low1, low2)).get_d();

    std::optional<mpq_class> upper;
    {
        const mpz_class lhs = mpz_class(st.r_minus) * st.c_plus + mpz_class(st.r_minus) * st.c_minus +
                              mpz_class(st.m) * st.r_minus;
        const mpz_class rc = mpz_class(st.r_plus) * st.c_plus;
        if (lhs > rc) {
            mpq_class u(mpz_class(st.c_plus) * (mpz_class(st.r_minus) * st.c_minus + mpz_class(st.m) * st.r_plus),
                        mpz_class(st.m) * (lhs - rc));
            u.canonicalize();
            upper = u;
        }
    }
    {
        const mpz_class lhs = mpz_class(st.c_minus) * st.r_plus + mpz_class(st.c_minus) * st.r_minus +
                              mpz_class(st.n) * st.c_minus;
        const mpz_class rc = mpz_class(st.r_plus) * st.c_plus;
        if (lhs > rc) {
            mpq_class u(mpz_class(st.r_plus) * (mpz_class(st.c_minus) * st.r_minus + mpz_class(st.n) * st.c_plus),
                        mpz_class(st.n) * (lhs - rc));
            u.canonicalize();
            if (!upper || u < *upper) upper = u;
        }
    }
    if (upper) out.upper = upper->get_d();
    return out;
}

} // namespace tally
