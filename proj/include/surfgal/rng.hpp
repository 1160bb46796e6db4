#pragma once

#include <cstdint>

namespace surfgal {

/// Counter-based uniform generator: draw k of stream `seed` is the k-th output
/// of SplitMix64 seeded with `seed`, i.e. mix(seed + (k + 1) * 0x9E3779B97F4A7C15)
/// with the standard SplitMix64 finalizer.  Any draw can be computed without
/// touching the others, so results do not depend on evaluation order.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

    constexpr std::uint64_t bits(std::uint64_t k) const {
        std::uint64_t z = seed_ + (k + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) from the top 53 bits of draw k.
    constexpr double uniform(std::uint64_t k) const {
        return static_cast<double>(bits(k) >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    constexpr double uniform(std::uint64_t k, double lo, double hi) const {
        return lo + (hi - lo) * uniform(k);
    }

private:
    std::uint64_t seed_;
};

}  // namespace surfgal
