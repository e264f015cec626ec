#include "distcache/allocation.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace distcache {

PartitionMap::PartitionMap(const Partitioner* partitioner, std::uint64_t ring_seed,
                           std::uint32_t vnodes_per_node)
    : partitioner_(partitioner),
      ring_seed_(ring_seed),
      vnodes_(vnodes_per_node),
      ring_(vnodes_per_node, ring_seed) {
  if (partitioner_ == nullptr) throw std::invalid_argument("PartitionMap: null partitioner");
  rebuild_ring();
}

void PartitionMap::rebuild_ring() {
  ring_ = HashRing(vnodes_, ring_seed_);
  for (std::uint32_t n = 0; n < partitioner_->upper_count(); ++n)
    if (!failed_.contains(n)) ring_.add(n);
}

std::uint32_t PartitionMap::upper_owner(const ObjectId& key) const {
  const std::uint32_t node = partitioner_->upper_of(key);
  if (!failed_.contains(node)) return node;
  if (!remapped_) return node;  // detection window: still targeted, drops
  return ring_.lookup(key);
}

std::uint32_t PartitionMap::lower_owner(const ObjectId& key) const {
  return partitioner_->lower_of(key);
}

void PartitionMap::mark_failed(std::uint32_t upper_node) {
  if (upper_node >= partitioner_->upper_count())
    throw std::invalid_argument("PartitionMap: unknown upper node");
  if (!failed_.insert(upper_node).second) return;
  remapped_ = false;
  ++version_;
}

void PartitionMap::complete_remap() {
  rebuild_ring();
  remapped_ = true;
  ++version_;
}

void PartitionMap::recover(std::uint32_t upper_node) {
  if (failed_.erase(upper_node) == 0) return;
  rebuild_ring();
  ++version_;
}

void PartitionMap::dump(std::ostream& out) const {
  out << "version " << version_ << '\n';
  out << "layer upper seed " << partitioner_->seed0() << " nodes "
      << partitioner_->upper_count() << '\n';
  for (std::uint32_t n = 0; n < partitioner_->upper_count(); ++n)
    out << "  node " << n << (failed_.contains(n) ? " failed" : " alive")
        << (failed_.contains(n) && remapped_ ? " remapped" : "") << '\n';
  out << "layer lower seed " << partitioner_->seed1() << " nodes "
      << partitioner_->lower_count() << '\n';
}

HotSet::HotSet(std::uint32_t upper_count, std::uint32_t lower_count)
    : upper_count_(upper_count), per_node_(upper_count + lower_count) {}

std::int32_t HotSet::upper_node_of(const ObjectId& key) const {
  if (replicated_mode_) return replicated_.contains(key) ? 0 : kNone;
  auto it = map_.find(key);
  return it == map_.end() ? kNone : it->second.first;
}

std::int32_t HotSet::lower_node_of(const ObjectId& key) const {
  if (replicated_mode_) return kNone;
  auto it = map_.find(key);
  return it == map_.end() ? kNone : it->second.second;
}

void HotSet::set_upper(const ObjectId& key, std::uint32_t node) {
  auto& cell = map_.try_emplace(key, std::pair<std::int32_t, std::int32_t>{kNone, kNone})
                   .first->second;
  if (cell.first != kNone) per_node_[cell.first].erase(key);
  cell.first = static_cast<std::int32_t>(node);
  per_node_[node].insert(key);
}

void HotSet::set_lower(const ObjectId& key, std::uint32_t node) {
  if (node < upper_count_) throw std::invalid_argument("HotSet: not a lower node id");
  auto& cell = map_.try_emplace(key, std::pair<std::int32_t, std::int32_t>{kNone, kNone})
                   .first->second;
  if (cell.second != kNone) per_node_[cell.second].erase(key);
  cell.second = static_cast<std::int32_t>(node);
  per_node_[node].insert(key);
}

void HotSet::clear_upper(const ObjectId& key) {
  auto it = map_.find(key);
  if (it == map_.end()) return;
  if (it->second.first != kNone) per_node_[it->second.first].erase(key);
  it->second.first = kNone;
  if (it->second.second == kNone) map_.erase(it);
}

void HotSet::clear_lower(const ObjectId& key) {
  auto it = map_.find(key);
  if (it == map_.end()) return;
  if (it->second.second != kNone) per_node_[it->second.second].erase(key);
  it->second.second = kNone;
  if (it->second.first == kNone) map_.erase(it);
}

Prepopulation plan_prepopulation(PolicyKind policy, const PartitionMap& pmap,
                                 const Partitioner& partitioner,
                                 std::uint64_t universe, const HotBudgets& budgets,
                                 std::uint32_t single_hash_pool,
                                 std::uint64_t single_hash_seed) {
  const std::uint32_t m0 = pmap.upper_count();
  const std::uint32_t m1 = pmap.lower_count();
  Prepopulation plan;
  plan.node_keys.resize(m0 + m1);
  if (policy == PolicyKind::kNoCache) return plan;

  if (policy == PolicyKind::kReplication) {
    const std::uint64_t n = std::min<std::uint64_t>(budgets.upper_per_node, universe);
    for (std::uint64_t rank = 0; rank < n; ++rank) {
      const ObjectId key = ObjectId::from_u64(rank);
      for (std::uint32_t node = 0; node < m0; ++node) plan.node_keys[node].push_back(key);
    }
    return plan;
  }

  if (policy == PolicyKind::kSingleHashUniform) {
    if (single_hash_pool == 0) single_hash_pool = m0 + m1;
    std::vector<std::size_t> filled(single_hash_pool, 0);
    const std::uint64_t scan =
        std::min<std::uint64_t>(universe, 64ull * budgets.upper_per_node * single_hash_pool);
    for (std::uint64_t rank = 0; rank < scan; ++rank) {
      const ObjectId key = ObjectId::from_u64(rank);
      const std::uint32_t node =
          bucket_of(hash_key(single_hash_seed, key), single_hash_pool);
      if (filled[node] >= budgets.upper_per_node) continue;
      ++filled[node];
      plan.node_keys[node].push_back(key);
    }
    return plan;
  }

  // DistCache / CachePartition: hottest objects of each node's partition.
  const bool use_upper = policy == PolicyKind::kPot;
  std::vector<std::size_t> filled(m0 + m1, 0);
  std::size_t upper_assigned = 0;
  const std::size_t upper_total =
      budgets.upper_total.value_or(static_cast<std::size_t>(budgets.upper_per_node) * m0);
  const std::uint64_t scan = std::min<std::uint64_t>(
      universe,
      64ull * (budgets.upper_per_node * m0 + budgets.lower_per_node * m1) + 1024);
  for (std::uint64_t rank = 0; rank < scan; ++rank) {
    const ObjectId key = ObjectId::from_u64(rank);
    if (use_upper && upper_assigned < upper_total) {
      const std::uint32_t owner = pmap.upper_owner(key);
      if (pmap.upper_alive(owner) && filled[owner] < budgets.upper_per_node) {
        ++filled[owner];
        ++upper_assigned;
        plan.node_keys[owner].push_back(key);
      }
    }
    const std::uint32_t lower = m0 + pmap.lower_owner(key);
    if (filled[lower] < budgets.lower_per_node) {
      ++filled[lower];
      plan.node_keys[lower].push_back(key);
    }
  }
  return plan;
}

std::vector<AllocationCommand> refresh_hot_set(
    const std::vector<CacheNode*>& nodes, const HotSet& hotset,
    const PartitionMap& pmap, const HotBudgets& budgets, std::size_t report_width) {
  const std::uint32_t m0 = pmap.upper_count();
  const std::uint32_t node_count = static_cast<std::uint32_t>(nodes.size());
  std::vector<AllocationCommand> commands;

  // Aggregate estimates: heavy-hitter reports plus the estimates of keys the
  // nodes currently cache.
  std::unordered_map<ObjectId, std::uint64_t, ObjectIdHash> estimate;
  for (std::uint32_t n = 0; n < node_count; ++n) {
    for (const auto& [key, est] : nodes[n]->hh_top_k(report_width)) estimate[key] += est;
    for (const auto& key : hotset.node_keys(n))
      estimate[key] += nodes[n]->detector().estimate_last(key);
  }

  struct Scored {
    ObjectId key;
    std::uint64_t score;
  };
  std::vector<Scored> ranked;
  ranked.reserve(estimate.size());
  for (const auto& [key, est] : estimate) ranked.push_back({key, est});
  std::sort(ranked.begin(), ranked.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.key < y.key;
  });

  // Per-node target sets: hottest keys of each node's partition.
  std::vector<std::unordered_set<ObjectId, ObjectIdHash>> target(node_count);
  std::size_t upper_assigned = 0;
  const std::size_t upper_total =
      budgets.upper_total.value_or(static_cast<std::size_t>(budgets.upper_per_node) * m0);
  for (const auto& scored : ranked) {
    if (upper_assigned < upper_total) {
      const std::uint32_t owner = pmap.upper_owner(scored.key);
      if (pmap.upper_alive(owner) && target[owner].size() < budgets.upper_per_node) {
        target[owner].insert(scored.key);
        ++upper_assigned;
      }
    }
    const std::uint32_t lower = m0 + pmap.lower_owner(scored.key);
    if (target[lower].size() < budgets.lower_per_node) target[lower].insert(scored.key);
  }

  for (std::uint32_t n = 0; n < node_count; ++n) {
    for (const auto& key : hotset.node_keys(n))
      if (!target[n].contains(key)) commands.push_back({CommandKind::kEvict, n, key});
    for (const auto& key : target[n])
      if (!hotset.node_keys(n).contains(key))
        commands.push_back({CommandKind::kInsert, n, key});
  }
  // Deterministic command order regardless of hash-map iteration.
  std::sort(commands.begin(), commands.end(), [](const auto& x, const auto& y) {
    if (x.node != y.node) return x.node < y.node;
    if (x.kind != y.kind) return x.kind == CommandKind::kEvict;
    return x.key < y.key;
  });
  return commands;
}

}  // namespace distcache
