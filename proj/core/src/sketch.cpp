#include "distcache/sketch.hpp"

#include <algorithm>
#include <stdexcept>

namespace distcache {

CountMinSketch::CountMinSketch(std::uint32_t rows, std::uint32_t cols, std::uint64_t seed)
    : rows_(rows), cols_(cols), seed_(seed) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("CountMinSketch: rows and cols must be >= 1");
  counters_.assign(static_cast<std::size_t>(rows) * cols, 0);
}

std::uint32_t CountMinSketch::slot(std::uint32_t row, const ObjectId& key) const {
  return bucket_of(hash_key(mix64(seed_, row), key), cols_);
}

std::uint32_t CountMinSketch::add(const ObjectId& key) {
  std::uint32_t est = kSaturated;
  for (std::uint32_t r = 0; r < rows_; ++r) {
    auto& c = counters_[static_cast<std::size_t>(r) * cols_ + slot(r, key)];
    if (c != kSaturated) ++c;  // saturate, never wrap
    est = std::min<std::uint32_t>(est, c);
  }
  return est;
}

std::uint32_t CountMinSketch::estimate(const ObjectId& key) const {
  std::uint32_t est = kSaturated;
  for (std::uint32_t r = 0; r < rows_; ++r)
    est = std::min<std::uint32_t>(
        est, counters_[static_cast<std::size_t>(r) * cols_ + slot(r, key)]);
  return est;
}

void CountMinSketch::reset(std::uint64_t seed) {
  seed_ = seed;
  std::fill(counters_.begin(), counters_.end(), 0);
}

BloomFilter::BloomFilter(std::uint32_t arrays, std::uint32_t bits_per_array,
                         std::uint64_t seed)
    : arrays_(arrays), bits_(bits_per_array), seed_(seed) {
  if (arrays == 0 || bits_per_array == 0)
    throw std::invalid_argument("BloomFilter: arrays and bits must be >= 1");
  words_.assign((static_cast<std::size_t>(arrays) * bits_per_array + 63) / 64, 0);
}

void BloomFilter::add(const ObjectId& key) {
  for (std::uint32_t a = 0; a < arrays_; ++a) {
    const std::size_t bit = static_cast<std::size_t>(a) * bits_ +
                            bucket_of(hash_key(mix64(seed_, a, 0xb100f), key), bits_);
    words_[bit >> 6] |= 1ULL << (bit & 63);
  }
}

bool BloomFilter::maybe_contains(const ObjectId& key) const {
  for (std::uint32_t a = 0; a < arrays_; ++a) {
    const std::size_t bit = static_cast<std::size_t>(a) * bits_ +
                            bucket_of(hash_key(mix64(seed_, a, 0xb100f), key), bits_);
    if (!(words_[bit >> 6] & (1ULL << (bit & 63)))) return false;
  }
  return true;
}

void BloomFilter::reset(std::uint64_t seed) {
  seed_ = seed;
  std::fill(words_.begin(), words_.end(), 0);
}

HeavyHitterDetector::HeavyHitterDetector(std::uint32_t node_id, std::uint64_t seed,
                                         const HeavyHitterConfig& config)
    : node_id_(node_id),
      seed_(seed),
      config_(config),
      current_(config.cms_rows, config.cms_cols, 0),
      last_(config.cms_rows, config.cms_cols, 0),
      bloom_(config.bloom_arrays, config.bloom_bits, 0) {
  current_.reset(sketch_seed(0));
  last_.reset(sketch_seed(0));
  bloom_.reset(mix64(seed_, node_id_, 0));
}

std::uint64_t HeavyHitterDetector::sketch_seed(std::uint64_t epoch) const {
  return mix64(seed_, node_id_, epoch);
}

std::uint32_t HeavyHitterDetector::observe(const ObjectId& key) {
  const std::uint32_t est = current_.add(key);
  if (est >= config_.candidate_threshold) candidates_[key] = est;
  return est;
}

void HeavyHitterDetector::mark_cached(const ObjectId& key) { bloom_.add(key); }

std::vector<std::pair<ObjectId, std::uint32_t>> HeavyHitterDetector::top_k(
    std::size_t k) const {
  std::vector<std::pair<ObjectId, std::uint32_t>> out;
  out.reserve(std::min(k, last_report_.size()));
  for (const auto& entry : last_report_) {
    if (out.size() >= k) break;
    out.push_back(entry);
  }
  return out;
}

void HeavyHitterDetector::advance_epoch(const std::vector<ObjectId>& cached_keys) {
  // Freeze the completed epoch's report before counters reset.
  last_report_.clear();
  last_report_.reserve(candidates_.size());
  for (const auto& [key, est] : candidates_) {
    if (bloom_.maybe_contains(key)) continue;
    last_report_.emplace_back(key, est);
  }
  std::sort(last_report_.begin(), last_report_.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (last_report_.size() > config_.max_report) last_report_.resize(config_.max_report);

  ++epoch_;
  std::swap(current_, last_);
  current_.reset(sketch_seed(epoch_));
  candidates_.clear();
  bloom_.reset(mix64(seed_, node_id_, epoch_));
  for (const auto& key : cached_keys) bloom_.add(key);
}

}  // namespace distcache
