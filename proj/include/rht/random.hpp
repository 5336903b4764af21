#pragma once

#include <cstdint>
#include <random>

namespace rht {

// std::mt19937_64 is fully specified by the standard; the distribution
// helpers below replace the implementation-defined std:: distributions so
// seeded runs are reproducible across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
template <class Urbg>
double uniform01(Urbg& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Urbg>
double uniform_in(Urbg& rng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform index in [0, n). n must be positive.
template <class Urbg>
std::size_t uniform_index(Urbg& rng, std::size_t n)
{
    // Rejection sampling on the top of the 64-bit range removes modulo bias.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t v = rng();
    while (v >= limit) {
        v = rng();
    }
    return static_cast<std::size_t>(v % bound);
}

template <class Urbg>
bool bernoulli_half(Urbg& rng)
{
    return (rng() >> 63) != 0;
}

} // namespace rht
