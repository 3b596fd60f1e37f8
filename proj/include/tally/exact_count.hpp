#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <gmpxx.h>

#include "tally/errors.hpp"
#include "tally/gammaln.hpp"
#include "tally/log_real.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/rng.hpp"

namespace tally {

inline constexpr double kDefaultDpStateBudget = 1e7;
inline constexpr std::int64_t kDefaultRyserCap = 20;
inline constexpr double kDefaultSimplexBruteCap = 1e6;

/// A-priori size of the column DP: product over rows of (r_i + 1) states,
/// times the number of columns.
inline double dp_state_bound(const Margins& margins) {
    double prod = 1.0;
    for (auto r : margins.rows()) {
        prod *= static_cast<double>(r) + 1.0;
        if (prod > 1e300) return std::numeric_limits<double>::infinity();
    }
    return prod * static_cast<double>(margins.col_count());
}

inline void check_dp_budget(const Margins& margins, double budget) {
    const double bound = dp_state_bound(margins);
    if (bound > budget)
        throw budget_error("state-space-budget-exceeded: column DP needs ~" +
                           std::to_string(bound) + " states, budget " + std::to_string(budget));
}

namespace detail {

// Remaining-row-sum vectors are map keys. Full-vector keying (rather than
// a packed integer) keeps canonicalized states collision-free: sorting a
// state can push values past their original position's radix, so no fixed
// mixed-radix encoding stays injective across the sorted states of one
// DP level.
struct StateHash {
    std::size_t operator()(const std::vector<std::int32_t>& s) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::int32_t v : s) {
            h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
            h *= 0x100000001b3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

// Enumerates every way of splitting `colsum` across the rows subject to the
// remaining budgets in `s`, ascending lexicographically. The same order is
// relied on by counting and by backward sampling.
template <typename F>
void for_each_split(const std::vector<std::int32_t>& s, std::int64_t colsum,
                    std::vector<std::int32_t>& d, const std::vector<std::int64_t>& suffix_cap,
                    std::size_t i, std::int64_t rem, F&& f) {
    const std::size_t m = s.size();
    if (i + 1 == m) {
        if (rem <= s[i]) {
            d[i] = static_cast<std::int32_t>(rem);
            f(d);
        }
        return;
    }
    const std::int64_t cap_rest = suffix_cap[i + 1];
    const std::int64_t lo = std::max<std::int64_t>(0, rem - cap_rest);
    const std::int64_t hi = std::min<std::int64_t>(s[i], rem);
    for (std::int64_t v = lo; v <= hi; ++v) {
        d[i] = static_cast<std::int32_t>(v);
        for_each_split(s, colsum, d, suffix_cap, i + 1, rem - v, f);
    }
}

template <typename F>
void for_each_split(const std::vector<std::int32_t>& s, std::int64_t colsum, F&& f) {
    const std::size_t m = s.size();
    std::vector<std::int64_t> suffix_cap(m + 1, 0);
    for (std::size_t i = m; i-- > 0;) suffix_cap[i] = suffix_cap[i + 1] + s[i];
    if (colsum > suffix_cap[0]) return;
    std::vector<std::int32_t> d(m, 0);
    for_each_split(s, colsum, d, suffix_cap, 0, colsum, f);
}

} // namespace detail

/// Exact table counting by a column-by-column dynamic program over the
/// vector of remaining row sums. Completion counts are symmetric under any
/// permutation of that vector, so states are canonicalized by sorting;
/// margins with repeated row sums collapse exponentially many states.
///
/// count() fills the memo for every reachable state; after it returns the
/// table is effectively immutable and sample() only reads it, so multiple
/// threads may draw concurrently with their own streams.
class TableCounter {
public:
    explicit TableCounter(Margins margins, double state_budget = kDefaultDpStateBudget,
                          bool canonicalize = true)
        : margins_(std::move(margins)), canonicalize_(canonicalize) {
        check_dp_budget(margins_, state_budget);
        memo_.resize(margins_.col_count() + 1);
    }

    const Margins& margins() const { return margins_; }

    const mpz_class& count() {
        std::vector<std::int32_t> root(margins_.row_count());
        for (std::size_t i = 0; i < root.size(); ++i)
            root[i] = static_cast<std::int32_t>(margins_.rows()[i]);
        return completions(0, root);
    }

    /// Draws one table exactly uniformly by walking the DP backwards,
    /// choosing each column split with probability proportional to the
    /// number of completions behind it.
    Table sample(Rng& rng) {
        const std::size_t m = margins_.row_count();
        const std::size_t n = margins_.col_count();
        Table out(m, n);
        std::vector<std::int32_t> s(m);
        for (std::size_t i = 0; i < m; ++i) s[i] = static_cast<std::int32_t>(margins_.rows()[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const mpz_class& total = completions(j, s);
            mpz_class u = random_below(total, rng);
            bool chosen = false;
            detail::for_each_split(s, margins_.cols()[j], [&](const std::vector<std::int32_t>& d) {
                if (chosen) return;
                std::vector<std::int32_t> child(s);
                for (std::size_t i = 0; i < m; ++i) child[i] -= d[i];
                const mpz_class& w = completions(j + 1, child);
                if (u < w) {
                    for (std::size_t i = 0; i < m; ++i) out(i, j) = d[i];
                    s = child;
                    chosen = true;
                } else {
                    u -= w;
                }
            });
            if (!chosen) throw std::logic_error("backward sampling walked past the total count");
        }
        return out;
    }

private:
    const mpz_class& completions(std::size_t level, const std::vector<std::int32_t>& s) {
        std::vector<std::int32_t> key(s);
        if (canonicalize_) std::sort(key.begin(), key.end());
        auto& layer = memo_[level];
        if (auto it = layer.find(key); it != layer.end()) return it->second;

        mpz_class total = 0;
        if (level == margins_.col_count()) {
            total = 1; // remaining sums are forced to zero here
        } else {
            detail::for_each_split(s, margins_.cols()[level], [&](const std::vector<std::int32_t>& d) {
                std::vector<std::int32_t> child(s);
                for (std::size_t i = 0; i < child.size(); ++i) child[i] -= d[i];
                total += completions(level + 1, child);
            });
        }
        return layer.emplace(std::move(key), std::move(total)).first->second;
    }

    static mpz_class random_below(const mpz_class& bound, Rng& rng) {
        if (bound <= 0) throw std::logic_error("random_below needs a positive bound");
        const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
        const std::size_t words = (bits + 63) / 64;
        while (true) {
            mpz_class x = 0;
            for (std::size_t w = 0; w < words; ++w) {
                mpz_mul_2exp(x.get_mpz_t(), x.get_mpz_t(), 64);
                // assembled from two 32-bit halves so the construction does
                // not depend on the width of unsigned long
                const std::uint64_t w64 = rng.next_u64();
                mpz_class hw(static_cast<unsigned long>(w64 >> 32));
                mpz_class lw(static_cast<unsigned long>(w64 & 0xffffffffULL));
                x += (hw << 32) + lw;
            }
            mpz_fdiv_r_2exp(x.get_mpz_t(), x.get_mpz_t(), static_cast<mp_bitcnt_t>(bits));
            if (x < bound) return x;
        }
    }

    Margins margins_;
    bool canonicalize_;
    std::vector<std::unordered_map<std::vector<std::int32_t>, mpz_class, detail::StateHash>> memo_;
};

/// Exact number of tables with the given margins.
inline mpz_class count_tables(const Margins& margins, double state_budget = kDefaultDpStateBudget) {
    TableCounter counter(margins, state_budget);
    return counter.count();
}

/// One uniform table; builds the DP afresh. Hold a TableCounter to draw
/// many tables from the same margins.
inline Table sample_table_uniform(const Margins& margins, Rng& rng,
                                  double state_budget = kDefaultDpStateBudget) {
    TableCounter counter(margins, state_budget, false);
    counter.count();
    return counter.sample(rng);
}

/// Natural log of a positive big integer.
inline double log_mpz(const mpz_class& v) {
    if (v <= 0) return -std::numeric_limits<double>::infinity();
    signed long exp2 = 0;
    const double mant = mpz_get_d_2exp(&exp2, v.get_mpz_t());
    return std::log(mant) + static_cast<double>(exp2) * 0.6931471805599453094;
}

inline double log10_mpz(const mpz_class& v) { return log_mpz(v) / 2.302585092994045684; }

/// Reusable sum-product plan over the column DP's reachable states. The
/// structure depends only on the margins; a single plan is evaluated many
/// times against different per-cell value tables.
class WeightedDpPlan {
public:
    /// cell values, indexed [j][i][d] with d <= min(r_i, c_j)
    struct CellValues {
        std::vector<std::vector<std::vector<long double>>> v;
    };

    explicit WeightedDpPlan(const Margins& margins, double state_budget = kDefaultDpStateBudget)
        : margins_(margins) {
        check_dp_budget(margins, state_budget);
        build();
    }

    const Margins& margins() const { return margins_; }

    CellValues make_cell_values(const std::function<long double(std::size_t, std::size_t, std::int64_t)>& f) const {
        const auto& R = margins_.rows();
        const auto& C = margins_.cols();
        CellValues cv;
        cv.v.resize(C.size());
        for (std::size_t j = 0; j < C.size(); ++j) {
            cv.v[j].resize(R.size());
            for (std::size_t i = 0; i < R.size(); ++i) {
                const std::int64_t dmax = std::min(R[i], C[j]);
                cv.v[j][i].resize(static_cast<std::size_t>(dmax) + 1);
                for (std::int64_t d = 0; d <= dmax; ++d)
                    cv.v[j][i][static_cast<std::size_t>(d)] = f(i, j, d);
            }
        }
        return cv;
    }

    /// Linear-scale evaluation in extended precision. Callers are expected
    /// to normalize cell values so products stay inside long double range;
    /// on underflow to zero use evaluate_log.
    long double evaluate(const CellValues& cv) const {
        std::vector<long double> next(1, 1.0L), cur;
        for (std::size_t j = levels_.size(); j-- > 0;) {
            const Level& lv = levels_[j];
            cur.assign(lv.node_count, 0.0L);
            const auto& vj = cv.v[j];
            const std::size_t m = margins_.row_count();
            for (std::size_t node = 0; node < lv.node_count; ++node) {
                long double acc = 0.0L;
                for (std::uint32_t e = lv.edge_begin[node]; e < lv.edge_begin[node + 1]; ++e) {
                    long double w = next[lv.edge_child[e]];
                    const std::int32_t* d = &lv.splits[static_cast<std::size_t>(e) * m];
                    for (std::size_t i = 0; i < m; ++i) w *= vj[i][static_cast<std::size_t>(d[i])];
                    acc += w;
                }
                cur[node] = acc;
            }
            next.swap(cur);
        }
        return next[0];
    }

    /// Log-scale evaluation (log-sum-exp per node); exact for zero cells.
    double evaluate_log(const CellValues& cv) const {
        constexpr double neg_inf = -std::numeric_limits<double>::infinity();
        std::vector<double> next(1, 0.0), cur;
        for (std::size_t j = levels_.size(); j-- > 0;) {
            const Level& lv = levels_[j];
            cur.assign(lv.node_count, neg_inf);
            const auto& vj = cv.v[j];
            const std::size_t m = margins_.row_count();
            for (std::size_t node = 0; node < lv.node_count; ++node) {
                double acc = neg_inf;
                for (std::uint32_t e = lv.edge_begin[node]; e < lv.edge_begin[node + 1]; ++e) {
                    double w = next[lv.edge_child[e]];
                    const std::int32_t* d = &lv.splits[static_cast<std::size_t>(e) * m];
                    for (std::size_t i = 0; i < m && w != neg_inf; ++i) {
                        const long double cell = vj[i][static_cast<std::size_t>(d[i])];
                        w = cell > 0.0L ? w + static_cast<double>(std::log(cell)) : neg_inf;
                    }
                    acc = log_add(acc, w);
                }
                cur[node] = acc;
            }
            next.swap(cur);
        }
        return next[0];
    }

private:
    struct Level {
        std::size_t node_count = 0;
        std::vector<std::uint32_t> edge_begin; // node_count + 1
        std::vector<std::uint32_t> edge_child;
        std::vector<std::int32_t> splits; // m entries per edge
    };

    void build() {
        const std::size_t m = margins_.row_count();
        const std::size_t n = margins_.col_count();

        std::vector<std::vector<std::int32_t>> frontier;
        {
            std::vector<std::int32_t> root(m);
            for (std::size_t i = 0; i < m; ++i) root[i] = static_cast<std::int32_t>(margins_.rows()[i]);
            frontier.push_back(std::move(root));
        }
        levels_.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            Level& lv = levels_[j];
            lv.node_count = frontier.size();
            lv.edge_begin.assign(frontier.size() + 1, 0);
            std::unordered_map<std::vector<std::int32_t>, std::uint32_t, detail::StateHash> child_ids;
            std::vector<std::vector<std::int32_t>> child_states;
            for (std::size_t node = 0; node < frontier.size(); ++node) {
                detail::for_each_split(frontier[node], margins_.cols()[j],
                                       [&](const std::vector<std::int32_t>& d) {
                    std::vector<std::int32_t> child(frontier[node]);
                    for (std::size_t i = 0; i < m; ++i) child[i] -= d[i];
                    auto [it, fresh] =
                        child_ids.emplace(child, static_cast<std::uint32_t>(child_states.size()));
                    if (fresh) child_states.push_back(std::move(child));
                    lv.edge_child.push_back(it->second);
                    for (std::size_t i = 0; i < m; ++i) lv.splits.push_back(d[i]);
                });
                lv.edge_begin[node + 1] = static_cast<std::uint32_t>(lv.edge_child.size());
            }
            frontier.swap(child_states);
        }
        // the last frontier is the single all-zero state
    }

    Margins margins_;
    std::vector<Level> levels_;
};

/// Weighted table sum: over all tables with the given margins, the sum of
/// the product of w_ij raised to the table entries (0^0 = 1).
inline LogReal count_weighted(const Margins& margins, const Matrix& weights,
                              double state_budget = kDefaultDpStateBudget) {
    if (weights.rows() != margins.row_count() || weights.cols() != margins.col_count())
        throw std::invalid_argument("weight matrix shape does not match margins");
    for (double w : weights.data())
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("weights must be finite and non-negative");

    const double wmax = weights.max();
    if (wmax == 0.0) return LogReal::zero(); // positive margins force some positive entry

    WeightedDpPlan plan(margins, state_budget);
    auto cv = plan.make_cell_values([&](std::size_t i, std::size_t j, std::int64_t d) {
        return d == 0 ? 1.0L
                      : std::pow(static_cast<long double>(weights(i, j) / wmax),
                                 static_cast<long double>(d));
    });
    const long double val = plan.evaluate(cv);
    const double shift = static_cast<double>(margins.total()) * std::log(wmax);
    if (val > 0.0L && std::isfinite(static_cast<double>(val)))
        return LogReal::from_log(static_cast<double>(std::log(val)) + shift);
    const double lg = plan.evaluate_log(cv);
    return LogReal::from_log(lg == -std::numeric_limits<double>::infinity()
                                 ? -std::numeric_limits<double>::infinity()
                                 : lg + shift);
}

inline LogReal per_block(const WeightedDpPlan& plan, const Matrix& X);

/// Permanent of the N x N block matrix whose (i,j) block is the r_i x c_j
/// submatrix filled with x_ij, computed exactly through the column DP:
///   per = (prod r_i!)(prod c_j!) * sum over tables of prod x_ij^d / d!.
inline LogReal per_block(const Margins& margins, const Matrix& X,
                         double state_budget = kDefaultDpStateBudget) {
    if (X.rows() != margins.row_count() || X.cols() != margins.col_count())
        throw std::invalid_argument("matrix shape does not match margins");
    if (!X.all_positive()) throw std::invalid_argument("per_block requires a strictly positive matrix");

    WeightedDpPlan plan(margins, state_budget);
    return per_block(plan, X);
}

/// Same, reusing a prebuilt plan (the hot path for the estimators).
inline LogReal per_block(const WeightedDpPlan& plan, const Matrix& X) {
    const Margins& margins = plan.margins();
    if (X.rows() != margins.row_count() || X.cols() != margins.col_count())
        throw std::invalid_argument("matrix shape does not match margins");
    const double xmax = X.max();
    if (!(xmax > 0.0)) throw std::invalid_argument("per_block requires a strictly positive matrix");

    auto cv = plan.make_cell_values([&](std::size_t i, std::size_t j, std::int64_t d) {
        const long double x = static_cast<long double>(X(i, j) / xmax);
        long double v = 1.0L;
        for (std::int64_t t = 1; t <= d; ++t) v *= x / static_cast<long double>(t);
        return v;
    });
    double log_sum;
    const long double val = plan.evaluate(cv);
    const double shift = static_cast<double>(margins.total()) * std::log(xmax);
    if (val > 0.0L && std::isfinite(static_cast<double>(val))) {
        log_sum = static_cast<double>(std::log(val)) + shift;
    } else {
        const double lg = plan.evaluate_log(cv);
        if (lg == -std::numeric_limits<double>::infinity()) return LogReal::zero();
        log_sum = lg + shift;
    }
    double log_fact = 0.0;
    for (auto r : margins.rows()) log_fact += log_factorial(r);
    for (auto c : margins.cols()) log_fact += log_factorial(c);
    return LogReal::from_log(log_fact + log_sum);
}

/// Exact permanent of a small square non-negative matrix by inclusion-
/// exclusion over column subsets (Gray-code order). Independent of the
/// column DP; serves as its cross-check.
inline LogReal per_ryser(const Matrix& A, std::int64_t cap = kDefaultRyserCap) {
    if (A.rows() != A.cols()) throw std::invalid_argument("per_ryser requires a square matrix");
    const std::size_t N = A.rows();
    if (N == 0) return LogReal::one();
    if (static_cast<std::int64_t>(N) > std::min<std::int64_t>(cap, 62))
        throw budget_error("per_ryser cap exceeded: N=" + std::to_string(N));
    for (double v : A.data())
        if (v < 0.0 || !std::isfinite(v))
            throw std::invalid_argument("per_ryser requires finite non-negative entries");

    // normalize rows by their maxima so partial products stay near 1
    double log_scale = 0.0;
    Matrix B = A;
    for (std::size_t i = 0; i < N; ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < N; ++j) mx = std::max(mx, B(i, j));
        if (mx == 0.0) return LogReal::zero(); // zero row
        for (std::size_t j = 0; j < N; ++j) B(i, j) /= mx;
        log_scale += std::log(mx);
    }

    std::vector<long double> rowsum(N, 0.0L);
    long double total = 0.0L;
    std::uint64_t prev = 0;
    const std::uint64_t subsets = (1ULL << N);
    for (std::uint64_t k = 1; k < subsets; ++k) {
        const std::uint64_t gray = k ^ (k >> 1);
        const std::uint64_t diff = gray ^ prev;
        const int j = std::countr_zero(diff);
        const long double sgn_col = (gray & diff) ? 1.0L : -1.0L;
        for (std::size_t i = 0; i < N; ++i)
            rowsum[i] += sgn_col * static_cast<long double>(B(i, static_cast<std::size_t>(j)));
        prev = gray;
        long double prod = 1.0L;
        for (std::size_t i = 0; i < N; ++i) prod *= rowsum[i];
        const bool even = (std::popcount(gray) % 2) == 0;
        total += ((N % 2 == 0) == even ? 1.0L : -1.0L) * prod;
    }
    if (!(total > 0.0L)) return LogReal::zero();
    return LogReal::from_log(static_cast<double>(std::log(total)) + log_scale);
}

/// Explicit block matrix with the (i,j) block filled by x_ij; small N only.
inline Matrix block_matrix(const Margins& margins, const Matrix& X) {
    const std::size_t N = static_cast<std::size_t>(margins.total());
    Matrix A(N, N);
    std::size_t row0 = 0;
    for (std::size_t i = 0; i < margins.row_count(); ++i) {
        std::size_t col0 = 0;
        for (std::size_t j = 0; j < margins.col_count(); ++j) {
            for (std::size_t a = 0; a < static_cast<std::size_t>(margins.rows()[i]); ++a)
                for (std::size_t b = 0; b < static_cast<std::size_t>(margins.cols()[j]); ++b)
                    A(row0 + a, col0 + b) = X(i, j);
            col0 += static_cast<std::size_t>(margins.cols()[j]);
        }
        row0 += static_cast<std::size_t>(margins.rows()[i]);
    }
    return A;
}

struct SimplexSumResult {
    std::optional<double> brute; // absent when the enumeration cap is hit
    double closed = 0.0;
};

/// Average over the integer simplex {d >= 0, sum d = c} of
/// prod Gamma(d_i - lambda_i + 1) / Gamma(d_i + 1), against its closed form
///   Gamma(c+m-l) Gamma(m) / (Gamma(c+m) Gamma(m-l)) * prod Gamma(1 - lambda_i).
inline SimplexSumResult simplex_sum(std::int64_t m, std::int64_t c,
                                    const std::vector<double>& lambdas,
                                    double brute_cap = kDefaultSimplexBruteCap) {
    if (m < 1 || c < 0) throw std::invalid_argument("simplex_sum needs m >= 1, c >= 0");
    if (static_cast<std::int64_t>(lambdas.size()) != m)
        throw std::invalid_argument("lambda count must equal m");
    double l = 0.0;
    for (double lam : lambdas) {
        if (!(lam < 1.0)) throw std::invalid_argument("each lambda must be < 1");
        l += lam;
    }

    SimplexSumResult out;
    double log_closed = gamma_ln(static_cast<double>(c + m) - l) + gamma_ln(static_cast<double>(m)) -
                        gamma_ln(static_cast<double>(c + m)) - gamma_ln(static_cast<double>(m) - l);
    for (double lam : lambdas) log_closed += gamma_ln(1.0 - lam);
    out.closed = std::exp(log_closed);

    const double cells = std::exp(log_binomial(m + c - 1, m - 1));
    if (cells <= brute_cap) {
        long double sum = 0.0L;
        std::uint64_t count = 0;
        std::vector<std::int64_t> d(static_cast<std::size_t>(m), 0);
        std::function<void(std::size_t, std::int64_t)> walk = [&](std::size_t i, std::int64_t rem) {
            if (i + 1 == static_cast<std::size_t>(m)) {
                d[i] = rem;
                double lg = 0.0;
                for (std::size_t k = 0; k < d.size(); ++k)
                    lg += gamma_ln(static_cast<double>(d[k]) - lambdas[k] + 1.0) -
                          gamma_ln(static_cast<double>(d[k]) + 1.0);
                sum += std::exp(static_cast<long double>(lg));
                ++count;
                return;
            }
            for (std::int64_t v = 0; v <= rem; ++v) {
                d[i] = v;
                walk(i + 1, rem - v);
            }
        };
        walk(0, c);
        out.brute = static_cast<double>(sum / static_cast<long double>(count));
    }
    return out;
}

} // namespace tally
