#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tally {

namespace detail {
// SplitMix64 step; used only to spread seeds, never as the main stream.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Seeded random stream. Every draw is defined on top of the raw 64-bit
/// output of mt19937_64, so sequences are reproducible bit-for-bit for a
/// fixed seed; no implementation-defined <random> distributions are used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Independent stream derived from (master, index); used to give each
    /// sampling chunk or chain its own non-overlapping stream.
    static Rng substream(std::uint64_t master, std::uint64_t index) {
        std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
        detail::splitmix64(s);
        return Rng(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on the open interval (0,1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform on (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard exponential.
    double exponential() { return -std::log(uniform01()); }

    /// Standard normal via Box-Muller; second value cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform01();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Gamma with positive integer shape and unit scale: sum of `shape`
    /// exponentials. Exact and portable; shapes stay small here.
    double gamma_int_shape(std::int64_t shape) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < shape; ++t) acc += exponential();
        return acc;
    }

    /// Uniform index in [0, n); rejection keeps it unbiased.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace tally
