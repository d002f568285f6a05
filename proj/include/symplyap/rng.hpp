#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace symplyap {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable 64-bit FNV-1a of a string (std::hash is not portable across builds).
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based key: a pure function of the seed and the tag sequence.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t k = mix64(seed);
  for (auto t : tags) k = mix64(k ^ mix64(t + 0x632be59bd9b4e019ULL));
  return k;
}

/// Uniform double in [0, 1) from the top 53 bits of a key.
constexpr double key_to_unit(std::uint64_t key) {
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

/// Independent stream for a trial/trajectory keyed by (seed, tags).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  return std::mt19937_64(derive_key(seed, tags));
}

namespace stream_tag {
inline constexpr std::uint64_t kCell = 0x43454c4cULL;
inline constexpr std::uint64_t kTrial = 0x545249414cULL;
inline constexpr std::uint64_t kTask = 0x5441534bULL;
inline constexpr std::uint64_t kAux = 0x415558ULL;
}  // namespace stream_tag

}  // namespace symplyap
