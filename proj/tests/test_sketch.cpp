#include <doctest.h>

#include <unordered_map>

#include "distcache/sketch.hpp"
#include "distcache/workload.hpp"

using namespace distcache;

TEST_SUITE_BEGIN("sketch");

TEST_CASE("count-min: single key counted exactly") {
  CountMinSketch cms(4, 1024, 9);
  const ObjectId key = ObjectId::from_u64(1);
  for (int i = 0; i < 100; ++i) cms.add(key);
  CHECK(cms.estimate(key) == 100);
}

TEST_CASE("count-min: never underestimates against an exact shadow") {
  CountMinSketch cms(4, 4096, 12);  // deliberately small, forcing collisions
  std::unordered_map<ObjectId, std::uint32_t, ObjectIdHash> exact;
  ZipfSampler sampler(50'000, 0.9);
  Rng rng(555);
  for (int i = 0; i < 200'000; ++i) {
    const ObjectId key = ObjectId::from_u64(sampler.sample(rng));
    cms.add(key);
    ++exact[key];
  }
  for (const auto& [key, count] : exact) CHECK(cms.estimate(key) >= count);
}

TEST_CASE("count-min: counters saturate instead of wrapping") {
  CountMinSketch cms(2, 8, 3);
  const ObjectId key = ObjectId::from_u64(2);
  for (std::uint32_t i = 0; i < 70'000; ++i) cms.add(key);
  CHECK(cms.estimate(key) == CountMinSketch::kSaturated);
}

TEST_CASE("bloom filter: membership and reset") {
  BloomFilter bloom(3, 1024, 4);
  const ObjectId a = ObjectId::from_u64(10);
  const ObjectId b = ObjectId::from_u64(11);
  CHECK_FALSE(bloom.maybe_contains(a));
  bloom.add(a);
  CHECK(bloom.maybe_contains(a));
  CHECK_FALSE(bloom.maybe_contains(b));  // tiny load, false positive unlikely
  bloom.reset(5);
  CHECK_FALSE(bloom.maybe_contains(a));
}

TEST_CASE("detector: no traffic reports nothing") {
  HeavyHitterDetector detector(1, 7);
  detector.advance_epoch({});
  CHECK(detector.top_k(10).empty());
}

TEST_CASE("detector: report is for the last completed epoch, hottest first") {
  HeavyHitterConfig config;
  config.candidate_threshold = 1;
  HeavyHitterDetector detector(1, 7, config);
  for (int i = 0; i < 50; ++i) detector.observe(ObjectId::from_u64(1));
  for (int i = 0; i < 30; ++i) detector.observe(ObjectId::from_u64(2));
  for (int i = 0; i < 10; ++i) detector.observe(ObjectId::from_u64(3));
  CHECK(detector.top_k(3).empty());  // nothing completed yet
  detector.advance_epoch({});
  const auto report = detector.top_k(2);
  REQUIRE(report.size() == 2);
  CHECK(report[0].first == ObjectId::from_u64(1));
  CHECK(report[0].second == 50);
  CHECK(report[1].first == ObjectId::from_u64(2));
  CHECK(detector.estimate_last(ObjectId::from_u64(3)) == 10);
}

TEST_CASE("detector: cached keys are suppressed from reports") {
  HeavyHitterConfig config;
  config.candidate_threshold = 1;
  HeavyHitterDetector detector(2, 8, config);
  const ObjectId cached = ObjectId::from_u64(1);
  const ObjectId uncached = ObjectId::from_u64(2);
  detector.mark_cached(cached);
  for (int i = 0; i < 90; ++i) detector.observe(cached);
  for (int i = 0; i < 40; ++i) detector.observe(uncached);
  detector.advance_epoch({cached});
  const auto report = detector.top_k(10);
  REQUIRE(report.size() == 1);
  CHECK(report[0].first == uncached);
  // Estimates for the cached key remain queryable for eviction ranking.
  CHECK(detector.estimate_last(cached) >= 90);
}

TEST_CASE("detector: epochs are independent (counters reset)") {
  HeavyHitterConfig config;
  config.candidate_threshold = 1;
  HeavyHitterDetector detector(3, 9, config);
  const ObjectId key = ObjectId::from_u64(5);
  for (int i = 0; i < 25; ++i) detector.observe(key);
  detector.advance_epoch({});
  CHECK(detector.estimate_current(key) == 0);
  CHECK(detector.observe(key) == 1);
}

TEST_SUITE_END();
