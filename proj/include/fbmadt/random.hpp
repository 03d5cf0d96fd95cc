// Counter-based substream derivation.
//
// Every random procedure takes a master seed and derives an independent
// generator per job (path, unit) by hashing the job coordinates into a
// 64-bit seed. Results therefore do not depend on how jobs are scheduled.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fbmadt {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for the substream addressed by `coords` under `master`.
inline std::uint64_t substream_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = mix64(master);
    for (auto c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
    return Rng(substream_seed(master, coords));
}

/// Standard normal draw.
inline double std_normal(Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    return nd(rng);
}

}  // namespace fbmadt
