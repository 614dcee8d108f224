#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ambc {

/// Seeded pseudo-random stream. Every random draw in the library goes through
/// an explicit instance of this type; there is no global generator.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Standard circularly-symmetric complex Gaussian CN(0, variance).
    std::complex<double> complex_normal(double variance = 1.0) {
        const double s = std::sqrt(0.5 * variance);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    double normal() { return normal_(engine_); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p = 0.5) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of the sub-stream identified by `path` under `master`. Distinct paths
/// give statistically independent streams, and the result depends only on
/// (master, path), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(master);
    for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline RandomStream derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return RandomStream(derive_seed(master, path));
}

/// Labels for the first component of derived stream paths.
namespace stream_tag {
inline constexpr std::uint64_t channel = 1;
inline constexpr std::uint64_t source_dataset = 2;
inline constexpr std::uint64_t target_dataset = 3;
inline constexpr std::uint64_t frame = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t train = 6;
inline constexpr std::uint64_t point = 7;
}  // namespace stream_tag

}  // namespace ambc
