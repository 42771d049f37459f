#pragma once
#include <cstdint>
#include <random>
#include <string_view>

namespace epi {

// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// One master seed spawns named, indexed substreams.  A substream is an
// ordinary mt19937_64 whose seed is a mix of (master, tag, index), so streams
// are mutually independent for practical purposes and reproducible.
class StreamFamily {
 public:
  explicit StreamFamily(std::uint64_t master) : master_(master) {}

  std::mt19937_64 stream(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t s = mix64(master_ ^ mix64(hash_tag(tag)) ^ mix64(index * 0x9e3779b97f4a7c15ULL + 1));
    return std::mt19937_64(s);
  }

  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

inline double uniform01(std::mt19937_64& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline double exponential(std::mt19937_64& g, double rate) {
  return std::exponential_distribution<double>(rate)(g);
}

}  // namespace epi
