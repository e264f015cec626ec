#include "distcache/cache_node.hpp"

#include <stdexcept>

namespace distcache {

CacheNode::CacheNode(std::uint32_t node_id, const CacheNodeConfig& config,
                     std::uint64_t seed)
    : node_id_(node_id),
      config_(config),
      detector_(node_id, seed, config.hh),
      load_(config.load_decay, config.age_after, config.aging_enabled) {
  if (config.slot_budget == 0)
    throw std::invalid_argument("CacheNode: slot budget must be >= 1");
}

GetResult CacheNode::cache_get(const ObjectId& key) {
  load_.record();
  detector_.observe(key);
  GetResult result;
  auto it = entries_.find(key);
  if (it != entries_.end() && it->second.valid) {
    result.hit = true;
    result.value = &it->second.value;
    result.version = it->second.version;
    ++hits_;
  } else {
    ++misses_;
  }
  return result;
}

std::uint64_t CacheNode::invalidate(const ObjectId& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return 0;
  it->second.valid = false;
  return it->second.version;
}

UpdateResult CacheNode::apply_update(const ObjectId& key, const Value& value,
                                     std::uint64_t version) {
  if (value.size() > kMaxValueBytes)
    throw std::invalid_argument("apply_update: value exceeds 128 bytes");
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    if (entries_.size() >= config_.slot_budget) evict_one();
    it = entries_.emplace(key, CacheEntry{}).first;
    detector_.mark_cached(key);
  }
  if (version <= it->second.version) return UpdateResult::kStaleRejected;
  it->second.value = value;
  it->second.version = version;
  it->second.valid = true;
  return UpdateResult::kApplied;
}

void CacheNode::insert_invalid(const ObjectId& key) {
  if (entries_.contains(key)) return;
  if (entries_.size() >= config_.slot_budget) evict_one();
  entries_.emplace(key, CacheEntry{});
  detector_.mark_cached(key);
}

bool CacheNode::erase(const ObjectId& key) { return entries_.erase(key) > 0; }

std::optional<CacheEntry> CacheNode::peek(const ObjectId& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<ObjectId> CacheNode::cached_keys() const {
  std::vector<ObjectId> keys;
  keys.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) keys.push_back(key);
  return keys;
}

void CacheNode::evict_one() {
  const ObjectId* victim = nullptr;
  bool victim_valid = false;
  std::uint32_t victim_est = 0;
  for (const auto& [key, entry] : entries_) {
    const std::uint32_t est = detector_.estimate_current(key);
    bool better;
    if (victim == nullptr) {
      better = true;
    } else if (entry.valid != victim_valid) {
      // Valid entries are preferred victims; invalid ones are in-flight
      // insertions the server is about to fill.
      better = entry.valid;
    } else if (est != victim_est) {
      better = est < victim_est;
    } else {
      better = key < *victim;
    }
    if (better) {
      victim = &key;
      victim_valid = entry.valid;
      victim_est = est;
    }
  }
  if (victim != nullptr) entries_.erase(*victim);
}

void CacheNode::tick_second() {
  load_.tick();
  detector_.advance_epoch(cached_keys());
}

}  // namespace distcache
