#include "distcache/routing.hpp"

#include <stdexcept>
#include <string>

namespace distcache {

const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kPot: return "distcache";
    case PolicyKind::kPartitionOnly: return "cachepartition";
    case PolicyKind::kReplication: return "cachereplication";
    case PolicyKind::kNoCache: return "nocache";
    case PolicyKind::kSingleHashUniform: return "singlehash";
  }
  return "unknown";
}

PolicyKind policy_from_name(const std::string& name) {
  if (name == "distcache" || name == "pot") return PolicyKind::kPot;
  if (name == "cachepartition" || name == "partition") return PolicyKind::kPartitionOnly;
  if (name == "cachereplication" || name == "replication") return PolicyKind::kReplication;
  if (name == "nocache") return PolicyKind::kNoCache;
  if (name == "singlehash") return PolicyKind::kSingleHashUniform;
  throw std::invalid_argument("unknown policy: " + name);
}

Router::Router(PolicyKind kind, const Partitioner* partitioner, RoutingTopology topo,
               std::uint64_t seed, std::uint64_t server_slot_seed)
    : kind_(kind),
      partitioner_(partitioner),
      topo_(topo),
      rng_(mix64(seed, 0x707e5)),
      server_slot_seed_(mix64(server_slot_seed, 0x5e11a)) {
  if (partitioner_ == nullptr) throw std::invalid_argument("Router: null partitioner");
  if (topo_.upper_count == 0 || topo_.lower_count == 0)
    throw std::invalid_argument("Router: empty layer");
  if (topo_.single_hash_pool == 0)
    topo_.single_hash_pool = topo_.upper_count + topo_.lower_count;
}

std::uint32_t Router::home_rack(const ObjectId& key) const {
  return partitioner_->lower_of(key);
}

std::uint32_t Router::home_server_slot(const ObjectId& key) const {
  return bucket_of(hash_key(server_slot_seed_, key), topo_.servers_per_rack);
}

Destination Router::server_destination(const ObjectId& key) {
  Destination dest;
  dest.kind = Destination::Kind::kServer;
  dest.target = home_rack(key);
  dest.via_upper = static_cast<std::int32_t>(random_upper());
  return dest;
}

Destination Router::route_set(const ObjectId& key) const {
  Destination dest;
  dest.kind = Destination::Kind::kServer;
  dest.target = home_rack(key);
  return dest;
}

Destination Router::route_get(const LoadTable& table, const ObjectId& key,
                              const HotSetView& hotset) {
  Destination dest;
  switch (kind_) {
    case PolicyKind::kNoCache:
      return server_destination(key);

    case PolicyKind::kPot: {
      const std::int32_t upper = hotset.upper_node_of(key);
      const std::int32_t lower = hotset.lower_node_of(key);
      if (upper == HotSetView::kNone && lower == HotSetView::kNone)
        return server_destination(key);
      std::int32_t chosen;
      if (upper == HotSetView::kNone) {
        chosen = lower;
      } else if (lower == HotSetView::kNone) {
        chosen = upper;
      } else {
        const std::uint64_t lu = table.load_of(upper);
        const std::uint64_t ll = table.load_of(lower);
        if (lu < ll)
          chosen = upper;
        else if (ll < lu)
          chosen = lower;
        else
          chosen = rng_.next_bool(0.5) ? upper : lower;  // ties broken randomly
      }
      dest.kind = Destination::Kind::kCacheNode;
      dest.target = static_cast<std::uint32_t>(chosen);
      const bool is_lower = dest.target >= topo_.upper_count;
      if (is_lower && !topo_.bypass_upper_on_lower_hit)
        dest.via_upper = static_cast<std::int32_t>(random_upper());
      return dest;
    }

    case PolicyKind::kPartitionOnly: {
      const std::int32_t lower = hotset.lower_node_of(key);
      if (lower == HotSetView::kNone) return server_destination(key);
      dest.kind = Destination::Kind::kCacheNode;
      dest.target = static_cast<std::uint32_t>(lower);
      if (!topo_.bypass_upper_on_lower_hit)
        dest.via_upper = static_cast<std::int32_t>(random_upper());
      return dest;
    }

    case PolicyKind::kReplication: {
      // Hot keys are replicated to every upper node; spread uniformly.
      if (hotset.upper_node_of(key) == HotSetView::kNone)
        return server_destination(key);
      dest.kind = Destination::Kind::kCacheNode;
      dest.target = random_upper();
      return dest;
    }

    case PolicyKind::kSingleHashUniform: {
      const std::uint32_t node =
          bucket_of(hash_key(partitioner_->seed0(), key), topo_.single_hash_pool);
      if (hotset.upper_node_of(key) == HotSetView::kNone &&
          hotset.lower_node_of(key) == HotSetView::kNone)
        return server_destination(key);
      dest.kind = Destination::Kind::kCacheNode;
      dest.target = node;
      const bool is_lower = node >= topo_.upper_count;
      if (is_lower && !topo_.bypass_upper_on_lower_hit)
        dest.via_upper = static_cast<std::int32_t>(random_upper());
      return dest;
    }
  }
  throw std::logic_error("route_get: unreachable");
}

}  // namespace distcache
