#pragma once

#include <cstdint>
#include <initializer_list>

namespace eegstate {

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from an ordered list of components:
/// h0 = splitmix64(c0), h_i = splitmix64(h_{i-1} ^ c_i).
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0;
  bool first = true;
  for (std::uint64_t p : parts) {
    h = first ? splitmix64(p) : splitmix64(h ^ p);
    first = false;
  }
  return h;
}

}  // namespace eegstate
