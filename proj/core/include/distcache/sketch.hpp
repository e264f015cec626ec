#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "distcache/object_id.hpp"

namespace distcache {

// Count-Min sketch with saturating 16-bit counters. Defaults match a
// switch-style heavy-hitter module: 4 register arrays of 64K slots.
class CountMinSketch {
 public:
  static constexpr std::uint16_t kSaturated = 0xffff;

  CountMinSketch(std::uint32_t rows, std::uint32_t cols, std::uint64_t seed);
  CountMinSketch() : CountMinSketch(4, 65536, 0) {}

  // Adds one occurrence and returns the new point estimate.
  std::uint32_t add(const ObjectId& key);
  std::uint32_t estimate(const ObjectId& key) const;
  void reset(std::uint64_t seed);

  std::uint32_t rows() const { return rows_; }
  std::uint32_t cols() const { return cols_; }

 private:
  std::uint32_t slot(std::uint32_t row, const ObjectId& key) const;

  std::uint32_t rows_;
  std::uint32_t cols_;
  std::uint64_t seed_;
  std::vector<std::uint16_t> counters_;  // rows_ * cols_
};

// Blocked Bloom filter: `arrays` one-bit register arrays, each indexed by an
// independent seeded hash. Defaults: 3 arrays of 256K slots.
class BloomFilter {
 public:
  BloomFilter(std::uint32_t arrays, std::uint32_t bits_per_array, std::uint64_t seed);
  BloomFilter() : BloomFilter(3, 262144, 0) {}

  void add(const ObjectId& key);
  bool maybe_contains(const ObjectId& key) const;
  void reset(std::uint64_t seed);

 private:
  std::uint32_t arrays_;
  std::uint32_t bits_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> words_;
};

struct HeavyHitterConfig {
  std::uint32_t cms_rows = 4;
  std::uint32_t cms_cols = 65536;
  std::uint32_t bloom_arrays = 3;
  std::uint32_t bloom_bits = 262144;
  // Keys only become report candidates once their estimate reaches this;
  // keeps the per-epoch candidate map small under heavy-tailed traffic.
  std::uint32_t candidate_threshold = 4;
  std::uint32_t max_report = 4096;
};

// Per-second heavy-hitter detection: a Count-Min sketch plus a Bloom filter
// that suppresses already-cached keys from reports. Counters reset every
// epoch; sketch seeds are derived from (node id, epoch) so epochs are
// independent.
class HeavyHitterDetector {
 public:
  HeavyHitterDetector(std::uint32_t node_id, std::uint64_t seed,
                      const HeavyHitterConfig& config = {});

  // Feeds one observed query for `key`; returns the current-epoch estimate.
  std::uint32_t observe(const ObjectId& key);

  // Marks a key as cached so reports skip it (until un-marked by epoch reset
  // without re-marking).
  void mark_cached(const ObjectId& key);

  // Top-k keys of the last completed epoch by estimate, descending, cached
  // keys suppressed. Ties broken by key bytes for determinism.
  std::vector<std::pair<ObjectId, std::uint32_t>> top_k(std::size_t k) const;

  std::uint32_t estimate_current(const ObjectId& key) const {
    return current_.estimate(key);
  }
  std::uint32_t estimate_last(const ObjectId& key) const { return last_.estimate(key); }
  std::uint64_t epoch() const { return epoch_; }

  // Rotates the epoch: current sketch becomes the completed one, counters
  // reset. `cached_keys` re-populates the Bloom suppression for the new epoch.
  void advance_epoch(const std::vector<ObjectId>& cached_keys);

 private:
  std::uint64_t sketch_seed(std::uint64_t epoch) const;

  std::uint32_t node_id_;
  std::uint64_t seed_;
  HeavyHitterConfig config_;
  std::uint64_t epoch_ = 0;
  CountMinSketch current_;
  CountMinSketch last_;
  BloomFilter bloom_;
  std::unordered_map<ObjectId, std::uint32_t, ObjectIdHash> candidates_;
  std::vector<std::pair<ObjectId, std::uint32_t>> last_report_;  // sorted desc
};

}  // namespace distcache
