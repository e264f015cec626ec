#include <doctest.h>

#include <sstream>

#include "distcache/matching.hpp"
#include "distcache/selfcheck.hpp"

using namespace distcache;

namespace {

std::vector<ObjectId> keys_for(std::uint32_t n) {
  std::vector<ObjectId> keys;
  for (std::uint32_t i = 0; i < n; ++i) keys.push_back(ObjectId::from_u64(i));
  return keys;
}

// The six-object, six-node scenario: three objects share one lower node but
// spread over all three upper nodes; rates and capacities are all 1.
MatchingInstance figure_instance() {
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs{
      {1, 0}, {0, 0}, {2, 0}, {2, 1}, {0, 2}, {1, 1}};
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(3, 3, pairs, keys_for(6));
  inst.rates.assign(6, 1.0);
  inst.capacities.assign(6, 1.0);
  return inst;
}

}  // namespace

TEST_SUITE_BEGIN("matching");

TEST_CASE("exhaustive oracle sanity: hand-checkable instances") {
  // Two objects of rate 1 on one shared pair with capacity 1 fit exactly.
  MatchingInstance fits;
  fits.graph = build_graph_from_pairs(1, 1, {{0, 0}, {0, 0}}, keys_for(2));
  fits.rates.assign(2, 1.0);
  fits.capacities.assign(2, 1.0);
  CHECK(selfcheck::exhaustive_flow_feasible(fits));

  MatchingInstance overfull = fits;
  overfull.rates = {2.0, 1.0};
  CHECK_FALSE(selfcheck::exhaustive_flow_feasible(overfull));
}

TEST_CASE("figure instance is feasible, saturating, and admits the documented "
          "assignment") {
  const auto inst = figure_instance();
  REQUIRE(selfcheck::exhaustive_flow_feasible(inst));

  const auto asg = solve_matching(inst);
  CHECK(asg.feasible);
  CHECK(asg.max_flow == doctest::Approx(6.0));
  CHECK(verify_assignment(inst, asg).valid);

  // A valid assignment can serve the first object entirely from its upper
  // node: objects 0..5 go to C1, C0, C3, C2, C5, C4 respectively.
  MatchingAssignment manual;
  manual.feasible = true;
  manual.upper_weight = {1, 1, 0, 1, 0, 0};
  manual.lower_weight = {0, 0, 1, 0, 1, 1};
  CHECK(verify_assignment(inst, manual).valid);
}

TEST_CASE("figure instance: exhaustive traffic intensity has rho_max = 1") {
  const auto report = traffic_intensity(figure_instance());
  CHECK(report.rho_max == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.pair_of_object.size() == 6);
}

TEST_CASE("all objects on one pair with excess demand is infeasible with a cut "
          "witness") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(4, 4, {{2, 1}, {2, 1}, {2, 1}}, keys_for(3));
  inst.rates.assign(3, 1.0);
  inst.capacities.assign(8, 1.0);
  const auto asg = solve_matching(inst);
  CHECK_FALSE(asg.feasible);
  CHECK(asg.max_flow == doctest::Approx(2.0));
  REQUIRE(asg.witness.has_value());
  CHECK(asg.witness->demand == doctest::Approx(3.0));
  CHECK(asg.witness->capacity == doctest::Approx(2.0));
  CHECK(asg.witness->nodes.size() == 2);
  CHECK_FALSE(selfcheck::exhaustive_flow_feasible(inst));
}

TEST_CASE("infeasible total demand above total capacity is an outcome, not an error") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(2, 2, {{0, 0}, {1, 1}}, keys_for(2));
  inst.rates = {5.0, 5.0};
  inst.capacities.assign(4, 1.0);
  CHECK_FALSE(solve_matching(inst).feasible);
}

TEST_CASE("solver equals the exhaustive oracle on random small instances") {
  const auto result = selfcheck::matching_oracle_equivalence(/*seed=*/7, /*cases=*/120,
                                                             /*max_objects=*/8,
                                                             /*max_nodes=*/4,
                                                             /*max_rate=*/4);
  CHECK(result.ok());
  CHECK(result.cases == 120);
  CHECK(result.feasible > 0);
  CHECK(result.cases - result.feasible > 0);  // both outcomes exercised
}

TEST_CASE("weak duality: max flow never exceeds min(demand, total capacity)") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto inst = selfcheck::random_small_instance(seed, 8, 4, 4);
    const auto asg = solve_matching(inst);
    CHECK(asg.max_flow <= inst.demand() + 1e-9);
    CHECK(asg.max_flow <= inst.capacity_total() + 1e-9);
  }
}

TEST_CASE("expansion: single object holds") {
  const auto g = build_graph_from_pairs(2, 2, {{0, 1}}, keys_for(1));
  CHECK(check_expansion(g).holds);
}

TEST_CASE("expansion: three objects sharing one pair fail with that witness") {
  const auto g = build_graph_from_pairs(3, 3, {{0, 0}, {0, 0}, {0, 0}}, keys_for(3));
  const auto result = check_expansion(g);
  CHECK_FALSE(result.holds);
  REQUIRE_FALSE(result.witness.empty());
  const auto gamma = g.neighborhood_by_index(result.witness);
  CHECK(gamma.size() < result.witness.size());
}

TEST_CASE("expansion checker equals subset enumeration on random graphs") {
  const auto result = selfcheck::expansion_oracle_equivalence(/*seed=*/3, /*cases=*/60,
                                                              /*max_objects=*/16,
                                                              /*max_nodes=*/8);
  CHECK(result.ok());
}

TEST_CASE("traffic intensity: single object on a pair has rho = r / (2T)") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(2, 2, {{1, 0}}, keys_for(1));
  inst.rates = {3.0};
  inst.capacities.assign(4, 5.0);
  const auto report = traffic_intensity(inst);
  REQUIRE(report.pair_entries.size() == 1);
  CHECK(report.pair_entries[0].rho == doctest::Approx(3.0 / 10.0));
  CHECK(report.rho_max == doctest::Approx(3.0 / 10.0));
}

TEST_CASE("traffic intensity: no objects gives rho_max 0") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(2, 2, {{0, 0}}, keys_for(1));
  inst.rates = {0.0};
  inst.capacities.assign(4, 1.0);
  CHECK(traffic_intensity(inst).rho_max == doctest::Approx(0.0));
}

TEST_CASE("traffic intensity: feasible instance with slack epsilon keeps "
          "rho_max <= 1 - epsilon") {
  const double epsilon = 0.25;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto inst = selfcheck::random_small_instance(seed, 6, 3, 3);
    auto asg = solve_matching(inst);
    if (!asg.feasible) continue;
    // Give every node 1/(1-eps) headroom over a feasible allocation.
    for (auto& c : inst.capacities) c /= (1.0 - epsilon);
    const auto report = traffic_intensity(inst);
    CHECK(report.rho_max <= 1.0 - epsilon + 1e-6);
  }
}

TEST_CASE("traffic intensity: exhaustive mode refuses oversized graphs") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < 30; ++i) pairs.push_back({i % 16, i % 16});
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(16, 16, pairs, keys_for(30));
  inst.rates.assign(30, 1.0);
  inst.capacities.assign(32, 4.0);
  CHECK_THROWS_AS(traffic_intensity(inst), std::length_error);
  const auto sampled = traffic_intensity_sampled(inst, 32, 9);
  CHECK(sampled.rho_max > 0.0);
}

TEST_CASE("instance text format round-trips") {
  const auto inst = figure_instance();
  std::stringstream buffer;
  write_instance(buffer, inst);
  const auto parsed = read_instance(buffer);
  REQUIRE(parsed.object_count() == inst.object_count());
  REQUIRE(parsed.node_count() == inst.node_count());
  for (std::uint32_t i = 0; i < inst.object_count(); ++i) {
    CHECK(parsed.graph.nodes_of(i) == inst.graph.nodes_of(i));
    CHECK(parsed.rates[i] == doctest::Approx(inst.rates[i]));
  }
  CHECK(solve_matching(parsed).feasible);
}

TEST_CASE("instance parser reports the offending line") {
  std::stringstream bad("# header next\n3 3 2 1.0 1000000\n0 0 0 1.0\n1 9 0 1.0\n");
  try {
    read_instance(bad);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_SUITE_END();
