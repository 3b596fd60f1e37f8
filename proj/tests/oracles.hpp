#pragma once

// Reference implementations used only by tests. Deliberately independent of
// the library's DP: straight exhaustive enumeration and textbook sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <gmpxx.h>

#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/rng.hpp"

namespace oracle {

/// Visits every non-negative integer matrix with the given margins by
/// filling cells row-major and pruning on remaining row/column budgets.
inline void for_each_table(const tally::Margins& margins,
                           const std::function<void(const tally::Table&)>& visit) {
    const std::size_t m = margins.row_count();
    const std::size_t n = margins.col_count();
    std::vector<std::int64_t> row_left(margins.rows());
    std::vector<std::int64_t> col_left(margins.cols());
    tally::Table t(m, n);

    std::function<void(std::size_t)> fill = [&](std::size_t cell) {
        if (cell == m * n) {
            visit(t);
            return;
        }
        const std::size_t i = cell / n;
        const std::size_t j = cell % n;
        std::int64_t lo = 0, hi = std::min(row_left[i], col_left[j]);
        if (j + 1 == n) { // last cell of the row absorbs the remaining row budget
            if (row_left[i] > col_left[j]) return;
            lo = hi = row_left[i];
        }
        if (i + 1 == m) { // last cell of the column absorbs the remaining column budget
            if (col_left[j] < lo || col_left[j] > hi) return;
            lo = hi = col_left[j];
        }
        for (std::int64_t d = lo; d <= hi; ++d) {
            t(i, j) = d;
            row_left[i] -= d;
            col_left[j] -= d;
            fill(cell + 1);
            row_left[i] += d;
            col_left[j] += d;
        }
    };
    fill(0);
}

inline mpz_class count_tables_brute(const tally::Margins& margins) {
    mpz_class count = 0;
    for_each_table(margins, [&](const tally::Table&) { ++count; });
    return count;
}

inline std::vector<tally::Table> all_tables(const tally::Margins& margins) {
    std::vector<tally::Table> out;
    for_each_table(margins, [&](const tally::Table& t) { out.push_back(t); });
    return out;
}

/// Independent uniform simplex sampler: spacings of sorted uniforms.
inline tally::Matrix simplex_by_spacings(std::size_t m, std::size_t n, tally::Rng& rng) {
    const std::size_t k = m * n;
    std::vector<double> u(k - 1);
    for (double& v : u) v = rng.uniform01();
    std::sort(u.begin(), u.end());
    tally::Matrix X(m, n);
    double prev = 0.0;
    for (std::size_t idx = 0; idx + 1 < k; ++idx) {
        X.data()[idx] = u[idx] - prev;
        prev = u[idx];
    }
    X.data()[k - 1] = 1.0 - prev;
    return X;
}

/// Upper quantile of the chi-square distribution by the Wilson-Hilferty
/// approximation; accurate enough for test thresholds.
inline double chi_square_quantile(double p_upper, std::int64_t df) {
    // z for the requested upper tail (hard-coded for the tails tests use)
    double z;
    if (p_upper <= 0.001)
        z = 3.090232306167813;
    else if (p_upper <= 0.01)
        z = 2.3263478740408408;
    else
        z = 1.6448536269514722;
    const double k = static_cast<double>(df);
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

} // namespace oracle
