#ifndef CABLE_RNG_HPP
#define CABLE_RNG_HPP

#include <cstdint>
#include <random>

namespace cable {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream tags keep independent roles (routes, ladder rungs) on disjoint streams.
enum class StreamTag : std::uint64_t {
    gff = 1,
    loopsoup = 2,
    signs = 3,
    edge_oracle = 4,
    meta = 5,
};

/// Seed of sample `index` in stream `tag`:
///   splitmix64(splitmix64(master ^ splitmix64(tag + salt)) + index).
/// The mapping is fixed, so results depend only on (master, tag, salt, index).
inline constexpr std::uint64_t stream_seed(std::uint64_t master, StreamTag tag, std::uint64_t index,
                                           std::uint64_t salt = 0) noexcept
{
    const std::uint64_t base = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(tag) + (salt << 8)));
    return splitmix64(base + index);
}

inline Rng make_stream(std::uint64_t master, StreamTag tag, std::uint64_t index, std::uint64_t salt = 0)
{
    return Rng(stream_seed(master, tag, index, salt));
}

inline double uniform01(Rng& rng)
{
    // 53 random mantissa bits, in [0,1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace cable

#endif
