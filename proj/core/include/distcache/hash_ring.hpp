#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>

#include "distcache/object_id.hpp"

namespace distcache {

// Consistent hashing over physical node ids with seeded virtual nodes.
// Used to spread a failed cache node's partition across survivors.
class HashRing {
 public:
  explicit HashRing(std::uint32_t vnodes_per_node = 64, std::uint64_t seed = 0)
      : vnodes_(vnodes_per_node), seed_(seed) {
    if (vnodes_per_node == 0)
      throw std::invalid_argument("HashRing: vnodes_per_node must be >= 1");
  }

  void add(std::uint32_t node) {
    for (std::uint32_t v = 0; v < vnodes_; ++v)
      ring_[mix64(seed_, node, v)] = node;
  }

  void remove(std::uint32_t node) {
    for (std::uint32_t v = 0; v < vnodes_; ++v)
      ring_.erase(mix64(seed_, node, v));
  }

  bool empty() const { return ring_.empty(); }
  std::size_t size() const { return ring_.size(); }

  // First virtual node clockwise of the key's hash point (wrapping).
  std::uint32_t lookup(const ObjectId& key) const {
    if (ring_.empty()) throw std::runtime_error("HashRing: no nodes");
    const std::uint64_t point = hash_key(mix64(seed_, 0x719c), key);
    auto it = ring_.lower_bound(point);
    if (it == ring_.end()) it = ring_.begin();
    return it->second;
  }

 private:
  std::uint32_t vnodes_;
  std::uint64_t seed_;
  std::map<std::uint64_t, std::uint32_t> ring_;
};

}  // namespace distcache
