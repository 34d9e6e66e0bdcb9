#pragma once

#include <cstdint>
#include <random>

namespace pderm {

/// Engine used for every random stream in the library.
using Rng = std::mt19937_64;

/// One round of the SplitMix64 output function.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/**
 * Derive the seed of an independent sub-stream from a master seed and a unit
 * index (path, replication, restart, continuation, ...).
 *
 * The mapping is `splitmix64(splitmix64(master) ^ splitmix64(index + 1))`.
 * It is a pure function, so results never depend on which worker thread
 * processes which unit.
 */
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Engine seeded from `derive_seed(master, index)`.
Rng make_rng(std::uint64_t master, std::uint64_t index);

}  // namespace pderm
