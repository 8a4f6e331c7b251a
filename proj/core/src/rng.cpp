#include "flags/rng.hpp"

#include <vector>

namespace flags {

Rng make_rng(std::uint64_t seed, Stream purpose,
             std::initializer_list<std::uint64_t> coords) {
  std::vector<std::uint32_t> words;
  words.reserve(3 + 2 * coords.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  words.push_back(static_cast<std::uint32_t>(purpose));
  for (std::uint64_t c : coords) {
    words.push_back(static_cast<std::uint32_t>(c));
    words.push_back(static_cast<std::uint32_t>(c >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                          std::initializer_list<std::uint64_t> coords) {
  Rng rng = make_rng(seed, purpose, coords);
  return rng();
}

}  // namespace flags
