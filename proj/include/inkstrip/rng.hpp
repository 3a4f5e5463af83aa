#ifndef INKSTRIP_RNG_HPP
#define INKSTRIP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace inkstrip {

/// SplitMix64 finalizer. Used both as the generator step and for seed mixing,
/// so that every generated byte is a pure function of (master_seed, index)
/// regardless of platform or thread schedule.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Per-sample seed derivation: mix(master ^ mix(index)).
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return mix64(master_seed ^ mix64(index));
}

/// Small deterministic RNG (SplitMix64 stream). Not cryptographic; the point
/// is a portable, fully specified sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer on [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Standard normal via Box-Muller (two uniforms per sample, no caching).
    double normal() {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace inkstrip

#endif
