#pragma once

#include <cstdint>
#include <vector>

#include "distcache/hashing.hpp"
#include "distcache/object_id.hpp"
#include "distcache/rng.hpp"

namespace distcache {

struct TelemetryStamp {
  std::uint16_t node_id = 0;
  std::uint32_t load = 0;
};

// Last-known load per cache node, as seen by one client ToR. Entries update
// only from telemetry stamps carried on reply packets; arrival order wins.
class LoadTable {
 public:
  explicit LoadTable(std::uint32_t cache_node_count)
      : load_(cache_node_count, 0), updated_at_(cache_node_count, -1) {}

  std::uint64_t load_of(std::uint32_t node) const { return load_[node]; }
  std::int64_t updated_at(std::uint32_t node) const { return updated_at_[node]; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(load_.size()); }

  void absorb(const TelemetryStamp& stamp, std::int64_t now) {
    load_[stamp.node_id] = stamp.load;
    updated_at_[stamp.node_id] = now;
  }

 private:
  std::vector<std::uint64_t> load_;
  std::vector<std::int64_t> updated_at_;
};

enum class PolicyKind : std::uint8_t {
  kPot,
  kPartitionOnly,
  kReplication,
  kNoCache,
  kSingleHashUniform,
};

const char* policy_name(PolicyKind kind);
PolicyKind policy_from_name(const std::string& name);

// Where the client ToR knows a key to be cached right now. Node ids are
// global (upper layer first), kNone when not cached in that layer.
struct HotSetView {
  static constexpr std::int32_t kNone = -1;
  virtual ~HotSetView() = default;
  virtual std::int32_t upper_node_of(const ObjectId& key) const = 0;
  virtual std::int32_t lower_node_of(const ObjectId& key) const = 0;
};

struct Destination {
  enum class Kind : std::uint8_t { kCacheNode, kServer } kind = Kind::kServer;
  // kCacheNode: global cache node id. kServer: home rack index.
  std::uint32_t target = 0;
  // Upper-layer node the packet transits on its way down, or kNoVia when the
  // target is itself in the upper layer (or bypassing).
  std::int32_t via_upper = kNoVia;
  static constexpr std::int32_t kNoVia = -1;
};

struct RoutingTopology {
  std::uint32_t upper_count = 0;
  std::uint32_t lower_count = 0;
  std::uint32_t servers_per_rack = 1;
  bool bypass_upper_on_lower_hit = false;
  // Single-hash baseline pool size (defaults to upper_count + lower_count).
  std::uint32_t single_hash_pool = 0;
};

// Client-rack query routing. One Router per client ToR, owning that rack's
// tie-break RNG; the load table is owned by the caller.
class Router {
 public:
  // `seed` drives this rack's tie-breaks; `server_slot_seed` must be shared
  // by every router so the home server is a function of the key alone.
  Router(PolicyKind kind, const Partitioner* partitioner, RoutingTopology topo,
         std::uint64_t seed, std::uint64_t server_slot_seed);

  PolicyKind kind() const { return kind_; }

  Destination route_get(const LoadTable& table, const ObjectId& key,
                        const HotSetView& hotset);

  // Writes always go to the key's home storage server.
  Destination route_set(const ObjectId& key) const;

  // Home of a key: rack = lower-layer hash (so misses forward with no
  // detour), server slot within the rack by a separate seeded hash.
  std::uint32_t home_rack(const ObjectId& key) const;
  std::uint32_t home_server_slot(const ObjectId& key) const;

  // Uniformly chosen upper node for pass-through path accounting, excluding
  // nothing; remapping away from failed nodes is the caller's concern.
  std::uint32_t random_upper() { return static_cast<std::uint32_t>(rng_.next_below(topo_.upper_count)); }

 private:
  Destination server_destination(const ObjectId& key);

  PolicyKind kind_;
  const Partitioner* partitioner_;
  RoutingTopology topo_;
  Rng rng_;
  std::uint64_t server_slot_seed_;
};

}  // namespace distcache
