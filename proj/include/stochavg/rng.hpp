// Seeded random streams with splittable sub-streams.
//
// Every Monte Carlo replication and every independent noise channel draws
// from its own sub-stream of one master seed, so sweeps are reproducible
// and the replication loop can be parallelized without changing results.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stochavg {

/// SplitMix64 finalizer; decorrelates derived seeds.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

/// Seed of sub-stream `index` under `master`.
inline constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master + 0x9E3779B97F4A7C15ull * (index + 1));
}

/// 64-bit engine with a portable uniform/Gaussian layer.
///
/// The Gaussian draw is Box-Muller and consumes exactly two engine outputs,
/// so a stream can be replayed sample-for-sample from its seed. Single-owner
/// mutable object: movable across threads, not shareable.
class RandomEngine {
public:
    explicit RandomEngine(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal sample.
    double gaussian() {
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;        // [0, 1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace stochavg
