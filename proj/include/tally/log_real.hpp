#pragma once

#include <cmath>
#include <limits>

#include "tally/gammaln.hpp"

namespace tally {

/// A non-negative real carried as its natural logarithm, with an explicit
/// zero flag so that exact zeros survive products and sums.
struct LogReal {
    double log_magnitude = 0.0;
    bool is_zero = false;

    static LogReal zero() { return LogReal{0.0, true}; }
    static LogReal one() { return LogReal{0.0, false}; }

    static LogReal from_log(double lg) {
        if (lg == -std::numeric_limits<double>::infinity()) return zero();
        return LogReal{lg, false};
    }

    static LogReal from_linear(double x) {
        if (x <= 0.0) return zero();
        return LogReal{std::log(x), false};
    }

    double log() const {
        return is_zero ? -std::numeric_limits<double>::infinity() : log_magnitude;
    }

    double linear() const { return is_zero ? 0.0 : std::exp(log_magnitude); }

    LogReal operator*(const LogReal& o) const {
        if (is_zero || o.is_zero) return zero();
        return LogReal{log_magnitude + o.log_magnitude, false};
    }

    LogReal operator/(const LogReal& o) const {
        if (is_zero) return zero();
        return LogReal{log_magnitude - o.log_magnitude, false};
    }

    LogReal operator+(const LogReal& o) const {
        if (is_zero) return o;
        if (o.is_zero) return *this;
        return LogReal{log_add(log_magnitude, o.log_magnitude), false};
    }

    LogReal& operator+=(const LogReal& o) { return *this = *this + o; }
    LogReal& operator*=(const LogReal& o) { return *this = *this * o; }

    bool operator<(const LogReal& o) const {
        if (is_zero) return !o.is_zero;
        if (o.is_zero) return false;
        return log_magnitude < o.log_magnitude;
    }
};

} // namespace tally
