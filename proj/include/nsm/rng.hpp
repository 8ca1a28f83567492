#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "nsm/common.hpp"

namespace nsm {

// splitmix64, used to derive substream seeds from (top seed, stream name).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

// All randomness flows from one top-level seed through named substreams, so
// independent commands and per-frame work stay reproducible regardless of
// evaluation order.
inline Rng substream(std::uint64_t seed, const std::string& name) {
  return Rng(splitmix64(seed ^ fnv1a(name)));
}

inline std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng deserialize_rng(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) fail(ErrorKind::checkpoint, "corrupt RNG state in checkpoint");
  return rng;
}

}  // namespace nsm
