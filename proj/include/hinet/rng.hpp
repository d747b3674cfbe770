#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hinet {

using Rng = std::mt19937_64;

/// Mixes a parent seed with a stream id into an independent child seed.
/// Every random draw in the library goes through a seed derived this way,
/// so a run is fully determined by its top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Stable 64-bit FNV-1a hash, used to give named modules their own streams.
std::uint64_t stable_hash(std::string_view text);

Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace hinet
