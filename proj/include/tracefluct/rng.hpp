#pragma once

#include <cstdint>

namespace tracefluct {

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream: every draw is a pure function of
/// (seed, stream, counter), so draws can be taken in any order or in parallel.
class CounterStream {
public:
    constexpr CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(seed + golden_gamma * mix64(stream + 0x632be59bd9b4e019ULL))) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ + golden_gamma * (counter + 1));
    }

    // Uniform on the open interval (0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

/// Child seed for the i-th independent task derived from a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i) noexcept {
    return mix64(mix64(master) ^ (golden_gamma * (i + 1)));
}

}  // namespace tracefluct
