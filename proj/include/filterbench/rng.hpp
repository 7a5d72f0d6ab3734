#pragma once
#include <cstdint>
#include <random>

namespace fb {

// splitmix64, used to derive independent substreams from (seed, id, step)
// so that per-particle noise does not depend on how many particles ran
// before it.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x517cc1b727220a95ULL));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

// Substream for a (seed, id, step) triple.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t id,
                                std::uint64_t step) {
    return std::mt19937_64(mix(mix(seed, id), step));
}

} // namespace fb
