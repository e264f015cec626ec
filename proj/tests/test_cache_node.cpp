#include <doctest.h>

#include <stdexcept>

#include "distcache/cache_node.hpp"

using namespace distcache;

namespace {

CacheNode make_node(std::size_t budget = 8) {
  CacheNodeConfig config;
  config.slot_budget = budget;
  config.hh.candidate_threshold = 1;
  return CacheNode(0, config, 42);
}

Value bytes(std::initializer_list<std::uint8_t> v) { return Value(v); }

}  // namespace

TEST_SUITE_BEGIN("cache_node");

TEST_CASE("empty cache misses") {
  auto node = make_node();
  CHECK_FALSE(node.cache_get(ObjectId::from_u64(1)).hit);
}

TEST_CASE("insert + update serves hits; invalidate hides the slot") {
  auto node = make_node();
  const ObjectId key = ObjectId::from_u64(1);
  node.insert_invalid(key);
  CHECK_FALSE(node.cache_get(key).hit);  // invalid entries never hit

  CHECK(node.apply_update(key, bytes({0xaa}), 1) == UpdateResult::kApplied);
  const auto hit = node.cache_get(key);
  REQUIRE(hit.hit);
  CHECK(*hit.value == bytes({0xaa}));
  CHECK(hit.version == 1);

  node.invalidate(key);
  CHECK_FALSE(node.cache_get(key).hit);  // occupied but invalid
  CHECK(node.contains(key));
}

TEST_CASE("invalidate is idempotent and safe on absent keys") {
  auto node = make_node();
  const ObjectId key = ObjectId::from_u64(7);
  CHECK(node.invalidate(key) == 0);
  CHECK(node.occupancy() == 0);

  node.apply_update(key, bytes({1}), 3);
  CHECK(node.invalidate(key) == 3);
  CHECK(node.invalidate(key) == 3);  // double invalidate: same state
  CHECK_FALSE(node.cache_get(key).hit);
}

TEST_CASE("apply_update: version gate rejects reordered updates") {
  auto node = make_node();
  const ObjectId key = ObjectId::from_u64(9);
  CHECK(node.apply_update(key, bytes({2}), 2) == UpdateResult::kApplied);
  CHECK(node.apply_update(key, bytes({1}), 1) == UpdateResult::kStaleRejected);
  CHECK(node.apply_update(key, bytes({2}), 2) == UpdateResult::kStaleRejected);
  const auto hit = node.cache_get(key);
  REQUIRE(hit.hit);
  CHECK(*hit.value == bytes({2}));

  // Version never decreases even through invalidation.
  node.invalidate(key);
  CHECK(node.apply_update(key, bytes({1}), 1) == UpdateResult::kStaleRejected);
  CHECK(node.apply_update(key, bytes({3}), 3) == UpdateResult::kApplied);
  CHECK(node.peek(key)->version == 3);
}

TEST_CASE("apply_update creates entries for agent-assigned slots") {
  auto node = make_node();
  const ObjectId key = ObjectId::from_u64(12);
  CHECK(node.apply_update(key, bytes({5}), 4) == UpdateResult::kApplied);
  CHECK(node.cache_get(key).hit);
}

TEST_CASE("apply_update rejects oversized values") {
  auto node = make_node();
  CHECK_THROWS_AS(node.apply_update(ObjectId::from_u64(1), Value(129, 0), 1),
                  std::invalid_argument);
  CHECK_NOTHROW(node.apply_update(ObjectId::from_u64(1), Value(128, 0), 1));
}

TEST_CASE("occupancy never exceeds the slot budget; coldest valid entry evicted") {
  auto node = make_node(3);
  // Heat differs: key 0 hottest, key 2 coldest.
  for (std::uint64_t k = 0; k < 3; ++k) {
    const ObjectId key = ObjectId::from_u64(k);
    node.apply_update(key, bytes({static_cast<std::uint8_t>(k)}), 1);
    for (std::uint64_t hits = 0; hits < 10 * (3 - k); ++hits) node.cache_get(key);
  }
  CHECK(node.occupancy() == 3);
  node.apply_update(ObjectId::from_u64(99), bytes({9}), 1);
  CHECK(node.occupancy() == 3);
  CHECK_FALSE(node.contains(ObjectId::from_u64(2)));  // coldest went
  CHECK(node.contains(ObjectId::from_u64(0)));
  CHECK(node.contains(ObjectId::from_u64(99)));
}

TEST_CASE("load counter: fresh node reports zero; window contents after tick") {
  auto node = make_node();
  CHECK(node.report_load() == 0);
  for (int i = 0; i < 42; ++i) node.cache_get(ObjectId::from_u64(i));
  CHECK(node.report_load() == 0);  // still within the first window
  node.tick_second();
  CHECK(node.report_load() == 42);
}

TEST_CASE("load counter: report is stable within a window regardless of traffic") {
  auto node = make_node();
  for (int i = 0; i < 10; ++i) node.cache_get(ObjectId::from_u64(i));
  node.tick_second();
  CHECK(node.report_load() == 10);
  for (int i = 0; i < 500; ++i) {
    node.cache_get(ObjectId::from_u64(i));
    CHECK(node.report_load() == 10);
  }
}

TEST_CASE("load counter aging: 42 then silent ticks decays 21, 10, 5") {
  // Hand-simulated recurrence with decay 0.5 after one silent window:
  // 42 -> floor(21) -> floor(10.5) -> floor(5.25).
  auto node = make_node();
  for (int i = 0; i < 42; ++i) node.cache_get(ObjectId::from_u64(i));
  node.tick_second();
  CHECK(node.report_load() == 42);
  node.tick_second();
  CHECK(node.report_load() == 21);
  node.tick_second();
  CHECK(node.report_load() == 10);
  node.tick_second();
  CHECK(node.report_load() == 5);
}

TEST_CASE("load counter aging can be disabled to match the prototype") {
  CacheNodeConfig config;
  config.slot_budget = 4;
  config.aging_enabled = false;
  CacheNode node(0, config, 1);
  for (int i = 0; i < 8; ++i) node.cache_get(ObjectId::from_u64(i));
  node.tick_second();
  node.tick_second();
  node.tick_second();
  CHECK(node.report_load() == 8);  // frozen without aging
}

TEST_CASE("transit packets count toward load but not the detector") {
  auto node = make_node();
  node.record_transit_packet();
  node.record_transit_packet();
  node.tick_second();
  CHECK(node.report_load() == 2);
  CHECK(node.hh_top_k(10).empty());
}

TEST_SUITE_END();
