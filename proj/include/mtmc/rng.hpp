#pragma once

#include <cstdint>
#include <random>

namespace mtmc {

// splitmix64-style stream derivation; streams keyed by (seed, tag, indices)
// are independent of evaluation order and thread schedule.
inline std::uint64_t rng_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rng_tag(const char* tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char* p = tag; *p; ++p) h = (h ^ static_cast<std::uint64_t>(*p)) * 1099511628211ULL;
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed, const char* tag, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = rng_mix(seed, rng_tag(tag));
    h = rng_mix(h, a);
    h = rng_mix(h, b);
    h = rng_mix(h, c);
    return std::mt19937_64(h);
}

} // namespace mtmc
