#pragma once

#include <cstdint>

namespace normsim {

// Generator family identifier, embedded in every output file. Trajectories are
// only comparable between builds that report the same family string.
inline constexpr const char* kRngFamily = "splitmix64/v1";

// 64-bit avalanche finalizer shared by the generator and stable_hash.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator, fully specified here so that identical seeds give
// byte-identical trajectories on any platform. Standard-library distributions
// are deliberately not used anywhere in the simulation path.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next_u64() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [-1, 1).
    double next_symmetric() noexcept { return 2.0 * next_double() - 1.0; }

    // Uniform integer in [0, n) via multiply-shift; one draw per call.
    std::uint64_t next_index(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // +1.0 or -1.0, each with probability 1/2 (low bit set means +1).
    double next_sign() noexcept { return (next_u64() & 1u) ? 1.0 : -1.0; }

private:
    std::uint64_t state_;
};

// Order-sensitive integer hash used to derive per-run seeds from coordinates
// such as (base_seed, grid indices, replicate). Extending a plan with new
// cells never changes the seed of an existing cell.
template <class... Fields>
constexpr std::uint64_t stable_hash(std::uint64_t base, Fields... fields) noexcept {
    std::uint64_t h = mix64(base + 0x9e3779b97f4a7c15ULL);
    ((h = mix64(h ^ (static_cast<std::uint64_t>(fields) + 0x9e3779b97f4a7c15ULL))), ...);
    return h;
}

}  // namespace normsim
