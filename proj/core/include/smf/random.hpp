#pragma once

#include <cstdint>
#include <random>

namespace smf {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Named sub-streams so that, e.g., the Gaussian draws of realization i do not
/// depend on whether the scaling variable is also drawn.
enum class Stream : std::uint64_t {
    Gaussian = 0x47,
    Scaling = 0x56,
    Mcmc = 0x4d,
    Conditional = 0x43,
    Bootstrap = 0x42,
    Optimizer = 0x4f,
    Layout = 0x4c,
};

/// Counter-based seed derivation: the generator for (seed, stream, index)
/// is independent of evaluation order.
inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    const std::uint64_t s =
        mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(stream))) + index);
    return Rng(s);
}

}  // namespace smf
