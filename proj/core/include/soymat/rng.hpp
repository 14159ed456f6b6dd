#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace soymat {

using Rng = std::mt19937_64;

// Mixes a root seed with stream identifiers so independent components
// (plots, flight days, epochs) draw from non-overlapping streams.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform double in [0, 1) with 53 random bits; portable across standard libraries.
double uniform01(Rng& rng);

// Uniform integer in [lo, hi] without modulo bias.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

// Standard normal deviate (Box-Muller, no cached spare).
double standard_normal(Rng& rng);

}  // namespace soymat
