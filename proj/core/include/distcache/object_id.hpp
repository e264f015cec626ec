#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <string>

#include "distcache/rng.hpp"

namespace distcache {

// Fixed-width 16-byte key. Identity is byte-exact; no normalization.
struct ObjectId {
  std::array<std::uint8_t, 16> bytes{};

  static ObjectId from_u64(std::uint64_t v) {
    ObjectId id;
    for (int i = 0; i < 8; ++i) id.bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return id;
  }

  std::uint64_t low64() const {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
  }

  std::uint64_t high64() const {
    std::uint64_t v = 0;
    for (int i = 15; i >= 8; --i) v = (v << 8) | bytes[i];
    return v;
  }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (auto b : bytes) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xf]);
    }
    return out;
  }

  auto operator<=>(const ObjectId&) const = default;
};

struct ObjectIdHash {
  std::size_t operator()(const ObjectId& id) const {
    return static_cast<std::size_t>(mix64(id.low64(), id.high64()));
  }
};

// Seeded 64-bit hash of a 16-byte key. Non-cryptographic; independence between
// hash functions comes from distinct seeds.
inline std::uint64_t hash_key(std::uint64_t seed, const ObjectId& key) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ key.low64());
  h = mix64(h ^ key.high64());
  return h;
}

// Maps a 64-bit hash onto [0, n) by multiply-shift; avoids modulo bias.
inline std::uint32_t bucket_of(std::uint64_t hash, std::uint32_t n) {
  return static_cast<std::uint32_t>(
      (static_cast<unsigned __int128>(hash) * n) >> 64);
}

}  // namespace distcache
