// Deterministic random streams and the seed-splitting scheme.
//
// All randomness in the project flows from a single root seed. Derived
// streams are obtained with split_seed(root, label, index) so that "5
// independent trials" means 5 deterministically derived seeds.
#pragma once

#include <magcap/core.hpp>

#include <cstdint>
#include <random>
#include <string_view>

namespace magcap {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
} // namespace detail

/// Derive a child seed from a root seed, a stream label and an index.
inline std::uint64_t split_seed(std::uint64_t root, std::string_view label,
                                std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(label.data(), label.size());
    h = detail::splitmix64(h ^ detail::splitmix64(root));
    return detail::splitmix64(h ^ index);
}

/// Deterministic random stream. Distributions are implemented inline so the
/// byte stream depends only on the seed, not on the standard library's
/// distribution internals.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [lo, hi] (inclusive), rejection-free for the
    /// buffer-sized ranges used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    /// Standard normal via Box-Muller (uncached, two uniforms per draw).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * constants::pi * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

  private:
    std::mt19937_64 gen_;
};

} // namespace magcap
