#include "sbg/rng.hpp"

namespace sbg {

// FNV-1a over the label folded into the root, then a splitmix64 finalizer so
// nearby roots/labels land far apart.  Gives every subsystem an independent,
// reproducible stream from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sbg
