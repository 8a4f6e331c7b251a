#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace flags {

using Rng = std::mt19937_64;

// Every random decision in a run is drawn from a generator keyed by
// (run seed, purpose, coordinates). Scheduling order therefore never changes
// results.
enum class Stream : std::uint32_t {
  topology = 1,
  init,
  epochs,
  shuffle,
  partition,
  noise,
  participation,
  pairing,
  sampling,
  synthetic,
};

Rng make_rng(std::uint64_t seed, Stream purpose,
             std::initializer_list<std::uint64_t> coords = {});

std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                          std::initializer_list<std::uint64_t> coords = {});

// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace flags
