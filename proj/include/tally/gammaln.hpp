#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

// Log-gamma is the single primitive behind every factorial, binomial and
// Gamma evaluation in the library; linear-scale values are exponentiated
// only at API boundaries.

namespace tally {

inline double gamma_ln(double x) {
    return std::lgamma(x);
}

/// ln(n!) for n >= 0.
inline double log_factorial(std::int64_t n) {
    return std::lgamma(static_cast<double>(n) + 1.0);
}

/// ln C(n, k); requires 0 <= k <= n.
inline double log_binomial(std::int64_t n, std::int64_t k) {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// ln(exp(a) + exp(b)), tolerating -inf operands.
inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

/// ln(exp(a) - exp(b)) for a >= b; returns -inf when the difference
/// underflows or b >= a up to rounding.
inline double log_sub(double a, double b) {
    if (b == -std::numeric_limits<double>::infinity()) return a;
    if (b >= a) return -std::numeric_limits<double>::infinity();
    const double d = -std::expm1(b - a); // 1 - exp(b-a) in (0,1]
    if (d <= 0.0) return -std::numeric_limits<double>::infinity();
    return a + std::log(d);
}

} // namespace tally
