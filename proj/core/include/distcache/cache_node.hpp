#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "distcache/object_id.hpp"
#include "distcache/sketch.hpp"

namespace distcache {

using Value = std::vector<std::uint8_t>;

inline constexpr std::size_t kMaxValueBytes = 128;

struct CacheEntry {
  Value value;
  std::uint64_t version = 0;
  bool valid = false;
};

// Packet counter over one-second windows. The reported load is the previous
// completed window, so it is stable between ticks. A node silent for
// `age_after` consecutive windows decays its report toward zero.
class LoadCounter {
 public:
  LoadCounter(double decay, std::uint32_t age_after, bool aging_enabled)
      : decay_(decay), age_after_(age_after), aging_enabled_(aging_enabled) {}

  void record() { ++window_count_; }
  std::uint64_t report() const { return last_report_; }
  std::uint64_t current_window() const { return window_count_; }

  void tick() {
    if (window_count_ > 0) {
      last_report_ = window_count_;
      silent_windows_ = 0;
    } else if (aging_enabled_) {
      ++silent_windows_;
      if (silent_windows_ >= age_after_)
        last_report_ = static_cast<std::uint64_t>(
            static_cast<double>(last_report_) * decay_);
    }
    window_count_ = 0;
  }

 private:
  double decay_;
  std::uint32_t age_after_;
  bool aging_enabled_;
  std::uint64_t window_count_ = 0;
  std::uint64_t last_report_ = 0;
  std::uint32_t silent_windows_ = 0;
};

struct CacheNodeConfig {
  std::size_t slot_budget = 100;
  double load_decay = 0.5;
  std::uint32_t age_after = 1;
  bool aging_enabled = true;
  HeavyHitterConfig hh;
};

struct GetResult {
  bool hit = false;
  const Value* value = nullptr;
  std::uint64_t version = 0;
};

enum class UpdateResult : std::uint8_t { kApplied, kStaleRejected };

// One cache switch: bounded key-value cache with validity bits, heavy-hitter
// detector, and the telemetry load counter. Single-owner mutable state; the
// simulator serializes all events per node.
class CacheNode {
 public:
  CacheNode(std::uint32_t node_id, const CacheNodeConfig& config, std::uint64_t seed);

  std::uint32_t node_id() const { return node_id_; }

  // Serves a read. Every call counts one packet and feeds the detector;
  // a MISS is a normal outcome. Invalid entries never hit.
  GetResult cache_get(const ObjectId& key);

  // Phase-1 invalidation; idempotent. Returns the entry's current version
  // (0 when the key is not cached).
  std::uint64_t invalidate(const ObjectId& key);

  // Phase-2 update / unified insertion path. Installs (value, version) and
  // marks the entry valid iff `version` is newer than the stored one;
  // reordered or duplicate updates are rejected. Creates the entry when the
  // key is absent, evicting if the cache is full.
  UpdateResult apply_update(const ObjectId& key, const Value& value,
                            std::uint64_t version);

  // Agent-side slot reservation: entry is created invalid, pending a phase-2
  // update from the server. No-op when the key is already cached.
  void insert_invalid(const ObjectId& key);

  // Agent-side eviction.
  bool erase(const ObjectId& key);

  bool contains(const ObjectId& key) const { return entries_.contains(key); }
  std::optional<CacheEntry> peek(const ObjectId& key) const;
  std::size_t occupancy() const { return entries_.size(); }
  std::size_t slot_budget() const { return config_.slot_budget; }
  std::vector<ObjectId> cached_keys() const;

  // Counts a forwarded packet that only transits the node.
  void record_transit_packet() { load_.record(); }

  std::uint64_t report_load() const { return load_.report(); }

  // The telemetry register stamped into reply headers: the running packet
  // count since the last per-second reset (fresh, unlike report_load).
  std::uint64_t telemetry_load() const { return load_.current_window(); }

  // Rotates the one-second window: load report, aging, heavy-hitter epoch.
  void tick_second();

  std::vector<std::pair<ObjectId, std::uint32_t>> hh_top_k(std::size_t k) const {
    return detector_.top_k(k);
  }
  HeavyHitterDetector& detector() { return detector_; }
  const HeavyHitterDetector& detector() const { return detector_; }

  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  // Frees one slot. Prefers the valid entry with the lowest current-epoch
  // estimate; ties broken by lowest key bytes.
  void evict_one();

  std::uint32_t node_id_;
  CacheNodeConfig config_;
  std::unordered_map<ObjectId, CacheEntry, ObjectIdHash> entries_;
  HeavyHitterDetector detector_;
  LoadCounter load_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace distcache
