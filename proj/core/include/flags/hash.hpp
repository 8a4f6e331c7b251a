#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace flags {

// FNV-1a, used for on-disk identifiers that must not depend on std::hash.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) noexcept {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_value(const T& v) noexcept {
    update(std::as_bytes(std::span<const T, 1>(&v, 1)));
  }
  void update(std::string_view s) noexcept { update(std::as_bytes(std::span(s.data(), s.size()))); }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace flags
