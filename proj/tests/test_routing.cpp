#include <doctest.h>

#include <unordered_map>

#include "distcache/hashing.hpp"
#include "distcache/routing.hpp"

using namespace distcache;

namespace {

// Scripted hot-set view for routing tests.
struct FakeHotSet : HotSetView {
  std::unordered_map<ObjectId, std::pair<std::int32_t, std::int32_t>, ObjectIdHash> map;
  std::int32_t upper_node_of(const ObjectId& key) const override {
    auto it = map.find(key);
    return it == map.end() ? kNone : it->second.first;
  }
  std::int32_t lower_node_of(const ObjectId& key) const override {
    auto it = map.find(key);
    return it == map.end() ? kNone : it->second.second;
  }
};

struct Fixture {
  Partitioner partitioner{101, 102, 4, 4};
  RoutingTopology topo{4, 4, 8, false, 0};
  LoadTable table{8};
  FakeHotSet hotset;
  ObjectId key = ObjectId::from_u64(5);

  Router router(PolicyKind kind, std::uint64_t seed = 7) {
    return Router(kind, &partitioner, topo, seed, 0x5e1ec7);
  }
  void cache_at(std::int32_t upper, std::int32_t lower) { hotset.map[key] = {upper, lower}; }
};

}  // namespace

TEST_SUITE_BEGIN("routing");

TEST_CASE("pot picks the less-loaded of the two designated nodes") {
  Fixture f;
  f.cache_at(1, 6);
  auto router = f.router(PolicyKind::kPot);
  f.table.absorb({1, 3}, 0);
  f.table.absorb({6, 1}, 0);
  const auto dest = router.route_get(f.table, f.key, f.hotset);
  CHECK(dest.kind == Destination::Kind::kCacheNode);
  CHECK(dest.target == 6);
  CHECK(dest.via_upper >= 0);  // lower-layer hit transits an upper node

  f.table.absorb({6, 9}, 1);
  const auto dest2 = router.route_get(f.table, f.key, f.hotset);
  CHECK(dest2.target == 1);
  CHECK(dest2.via_upper == Destination::kNoVia);  // upper target, no transit
}

TEST_CASE("pot destination is always one of the key's two nodes") {
  Fixture f;
  f.cache_at(2, 5);
  auto router = f.router(PolicyKind::kPot);
  Rng loads(99);
  for (int i = 0; i < 500; ++i) {
    f.table.absorb({2, static_cast<std::uint32_t>(loads.next_below(100))}, i);
    f.table.absorb({5, static_cast<std::uint32_t>(loads.next_below(100))}, i);
    const auto dest = router.route_get(f.table, f.key, f.hotset);
    CHECK((dest.target == 2 || dest.target == 5));
  }
}

TEST_CASE("pot: exact tie broken randomly, about half each way") {
  Fixture f;
  f.cache_at(0, 4);
  auto router = f.router(PolicyKind::kPot, 1234);
  f.table.absorb({0, 2}, 0);
  f.table.absorb({4, 2}, 0);
  int upper = 0;
  const int trials = 10'000;
  for (int i = 0; i < trials; ++i)
    upper += router.route_get(f.table, f.key, f.hotset).target == 0 ? 1 : 0;
  const double frac = static_cast<double>(upper) / trials;
  // 3 sigma around 0.5 at n = 1e4 is +-0.015.
  CHECK(frac > 0.485);
  CHECK(frac < 0.515);
}

TEST_CASE("pot: argmin is invariant under scaling all loads") {
  Fixture f;
  f.cache_at(3, 7);
  auto router = f.router(PolicyKind::kPot);
  for (std::uint32_t scale : {1u, 2u, 10u, 1000u}) {
    f.table.absorb({3, 30 * scale}, 0);
    f.table.absorb({7, 20 * scale}, 0);
    CHECK(router.route_get(f.table, f.key, f.hotset).target == 7);
  }
}

TEST_CASE("uncached keys go to the home server through a random upper node") {
  Fixture f;
  auto router = f.router(PolicyKind::kPot);
  const auto dest = router.route_get(f.table, f.key, f.hotset);
  CHECK(dest.kind == Destination::Kind::kServer);
  CHECK(dest.target == f.partitioner.lower_of(f.key));  // home rack
  CHECK(dest.via_upper >= 0);
  CHECK(dest.via_upper < 4);
}

TEST_CASE("nocache always routes to the home server") {
  Fixture f;
  f.cache_at(1, 5);  // even cached keys
  auto router = f.router(PolicyKind::kNoCache);
  const auto dest = router.route_get(f.table, f.key, f.hotset);
  CHECK(dest.kind == Destination::Kind::kServer);
  CHECK(dest.target == f.partitioner.lower_of(f.key));
}

TEST_CASE("partition-only uses the lower-layer node") {
  Fixture f;
  f.cache_at(HotSetView::kNone, 6);
  auto router = f.router(PolicyKind::kPartitionOnly);
  const auto dest = router.route_get(f.table, f.key, f.hotset);
  CHECK(dest.kind == Destination::Kind::kCacheNode);
  CHECK(dest.target == 6);
}

TEST_CASE("replication spreads cached reads uniformly over upper nodes") {
  Fixture f;
  f.cache_at(0, HotSetView::kNone);  // marker: replicated
  auto router = f.router(PolicyKind::kReplication, 99);
  std::vector<int> counts(4, 0);
  const int trials = 8000;
  for (int i = 0; i < trials; ++i) {
    const auto dest = router.route_get(f.table, f.key, f.hotset);
    REQUIRE(dest.kind == Destination::Kind::kCacheNode);
    ++counts[dest.target];
  }
  for (int c : counts) {
    CHECK(c > trials / 4 - 300);
    CHECK(c < trials / 4 + 300);
  }
}

TEST_CASE("route_set always targets the home server, deterministically") {
  Fixture f;
  f.cache_at(1, 5);
  auto router = f.router(PolicyKind::kPot);
  const auto first = router.route_set(f.key);
  CHECK(first.kind == Destination::Kind::kServer);
  CHECK(first.target == f.partitioner.lower_of(f.key));
  for (int i = 0; i < 10; ++i) {
    const auto again = router.route_set(f.key);
    CHECK(again.target == first.target);
    CHECK(router.home_server_slot(f.key) < 8);
  }
  // Uncached keys follow the same rule.
  const ObjectId other = ObjectId::from_u64(1000);
  CHECK(router.route_set(other).target == f.partitioner.lower_of(other));
}

TEST_CASE("home server does not depend on which client rack routes the query") {
  Fixture f;
  Router r0(PolicyKind::kNoCache, &f.partitioner, f.topo, /*seed=*/1, 0xabc);
  Router r1(PolicyKind::kNoCache, &f.partitioner, f.topo, /*seed=*/2, 0xabc);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const ObjectId key = ObjectId::from_u64(k);
    CHECK(r0.home_rack(key) == r1.home_rack(key));
    CHECK(r0.home_server_slot(key) == r1.home_server_slot(key));
  }
}

TEST_CASE("telemetry absorption overwrites entries, last writer wins") {
  LoadTable table(8);
  table.absorb({7, 120}, 5);
  CHECK(table.load_of(7) == 120);
  CHECK(table.updated_at(7) == 5);

  // Two stamps on one reply update both entries.
  table.absorb({2, 40}, 6);
  table.absorb({3, 50}, 6);
  CHECK(table.load_of(2) == 40);
  CHECK(table.load_of(3) == 50);

  // A stamp carrying older data still applies on arrival order.
  table.absorb({7, 80}, 9);
  CHECK(table.load_of(7) == 80);
}

TEST_SUITE_END();
