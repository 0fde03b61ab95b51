#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mol::rng {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream names into ids.
constexpr std::uint64_t name_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Child seed for stream `id` under `seed`. Derivation is a pure function, so a
// worker can rebuild any stream without coordinating with others.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t id) {
  return splitmix64(seed ^ splitmix64(id + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive(std::uint64_t seed, std::string_view name) {
  return derive(seed, name_id(name));
}

inline std::uint64_t derive_path(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  for (auto id : path) seed = derive(seed, id);
  return seed;
}

inline Engine stream(std::uint64_t seed) { return Engine(splitmix64(seed)); }

inline Engine stream(std::uint64_t seed, std::string_view name) {
  return Engine(splitmix64(derive(seed, name)));
}

inline Engine stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return Engine(splitmix64(derive(derive(seed, name), index)));
}

}  // namespace mol::rng
