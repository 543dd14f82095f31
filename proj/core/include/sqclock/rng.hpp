#pragma once

#include <cstdint>
#include <random>

namespace sqclock {

/// Deterministic random stream. Every shot gets its own stream derived from
/// (seed, shot index, purpose tag), so shots can run in any order or in
/// parallel and still draw identical numbers.
class Rng {
public:
    explicit Rng(std::uint64_t state) : engine_(state) {}

    static Rng for_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0);

    double normal() { return normal_(engine_); }
    double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 finalizer; used for stream derivation and hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace sqclock
