#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "distcache/cache_node.hpp"
#include "distcache/hash_ring.hpp"
#include "distcache/hashing.hpp"
#include "distcache/routing.hpp"
#include "distcache/workload.hpp"

namespace distcache {

// O(l log l) / O(m log m) hot-set sizes with explicit constants.
inline std::size_t theory_budget(std::uint32_t n, double c) {
  if (n <= 1) return 1;
  return static_cast<std::size_t>(
      std::ceil(c * static_cast<double>(n) * std::log(static_cast<double>(n))));
}

// Cache-eligibility per layer: within a layer, partitions are disjoint and
// cover the key space. Upper-layer partitions of failed nodes are remapped
// across survivors via the consistent-hash ring once the controller's
// detection delay elapses; recovery restores the original partition.
class PartitionMap {
 public:
  PartitionMap(const Partitioner* partitioner, std::uint64_t ring_seed,
               std::uint32_t vnodes_per_node = 64);

  std::uint64_t version() const { return version_; }
  std::uint32_t upper_count() const { return partitioner_->upper_count(); }
  std::uint32_t lower_count() const { return partitioner_->lower_count(); }

  std::uint32_t upper_owner(const ObjectId& key) const;
  std::uint32_t lower_owner(const ObjectId& key) const;

  bool upper_alive(std::uint32_t node) const { return !failed_.contains(node); }
  std::size_t failed_count() const { return failed_.size(); }
  bool remap_active() const { return remapped_; }

  // Failure handling: mark_failed keeps the partition pointed at the dead
  // node (traffic black-holes) until complete_remap() spreads it over the
  // survivors. Each transition bumps the version.
  void mark_failed(std::uint32_t upper_node);
  void complete_remap();
  void recover(std::uint32_t upper_node);

  void dump(std::ostream& out) const;

 private:
  void rebuild_ring();

  const Partitioner* partitioner_;
  std::uint64_t ring_seed_;
  std::uint32_t vnodes_;
  std::unordered_set<std::uint32_t> failed_;
  bool remapped_ = false;
  HashRing ring_;
  std::uint64_t version_ = 1;
};

// The controller's record of which node caches which key, one per layer at
// most ("cached at most once per layer"). Doubles as the client ToRs' view
// for query routing. In replicated mode the upper layer holds one shared hot
// set on every node.
class HotSet : public HotSetView {
 public:
  HotSet(std::uint32_t upper_count, std::uint32_t lower_count);

  std::int32_t upper_node_of(const ObjectId& key) const override;
  std::int32_t lower_node_of(const ObjectId& key) const override;

  void set_upper(const ObjectId& key, std::uint32_t node);
  void set_lower(const ObjectId& key, std::uint32_t node);  // global node id
  void clear_upper(const ObjectId& key);
  void clear_lower(const ObjectId& key);

  void set_replicated_mode(bool on) { replicated_mode_ = on; }
  void add_replicated(const ObjectId& key) { replicated_.insert(key); }
  bool is_replicated(const ObjectId& key) const { return replicated_.contains(key); }

  const std::unordered_set<ObjectId, ObjectIdHash>& node_keys(std::uint32_t node) const {
    return per_node_[node];
  }
  std::size_t hot_count() const { return map_.size(); }

 private:
  std::uint32_t upper_count_;
  std::unordered_map<ObjectId, std::pair<std::int32_t, std::int32_t>, ObjectIdHash> map_;
  std::vector<std::unordered_set<ObjectId, ObjectIdHash>> per_node_;
  std::unordered_set<ObjectId, ObjectIdHash> replicated_;
  bool replicated_mode_ = false;
};

struct HotBudgets {
  std::size_t upper_per_node = 100;
  std::size_t lower_per_node = 100;
  // Optional global cap on upper-layer keys (the O(m log m) total).
  std::optional<std::size_t> upper_total;
};

// Keys each cache node starts with: the hottest objects of its partition,
// planned straight from the query distribution (ranks are hottest-first).
struct Prepopulation {
  // Per global cache node id.
  std::vector<std::vector<ObjectId>> node_keys;
};

Prepopulation plan_prepopulation(PolicyKind policy, const PartitionMap& pmap,
                                 const Partitioner& partitioner,
                                 std::uint64_t universe, const HotBudgets& budgets,
                                 std::uint32_t single_hash_pool = 0,
                                 std::uint64_t single_hash_seed = 0);

enum class CommandKind : std::uint8_t { kInsert, kEvict };

struct AllocationCommand {
  CommandKind kind;
  std::uint32_t node;  // global cache node id
  ObjectId key;
};

// One controller refresh pass: aggregates the per-node heavy-hitter reports
// (plus current cached-key estimates), recomputes the per-node target sets,
// and emits the insert/evict diff. Commands never touch a key outside the
// target node's partition.
std::vector<AllocationCommand> refresh_hot_set(
    const std::vector<CacheNode*>& nodes, const HotSet& hotset,
    const PartitionMap& pmap, const HotBudgets& budgets, std::size_t report_width);

}  // namespace distcache
