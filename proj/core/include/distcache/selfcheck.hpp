#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distcache/matching.hpp"

namespace distcache::selfcheck {

// Independent feasibility oracle for small integer instances: exhaustively
// splits each object's integer rate between its two nodes (DFS with
// pruning). No flow algorithm shared with solve_matching; by integrality of
// max flow the integer-split answer equals the fractional one.
bool exhaustive_flow_feasible(const MatchingInstance& inst);

// Independent expansion oracle: enumerates all 2^|U| subsets.
bool expansion_brute_force(const BipartiteGraph& g);

// Random small instance. Node counts in [1, max_nodes] per layer, integer
// rates in [0, max_rate], uniform capacity in [1, max_rate].
MatchingInstance random_small_instance(std::uint64_t seed, std::uint32_t max_objects,
                                       std::uint32_t max_nodes, std::uint32_t max_rate);

BipartiteGraph random_small_graph(std::uint64_t seed, std::uint32_t max_objects,
                                  std::uint32_t max_nodes);

struct EquivalenceResult {
  std::uint64_t cases = 0;
  std::uint64_t agreed = 0;
  std::uint64_t feasible = 0;
  std::uint64_t invalid_assignments = 0;  // solver said feasible, checker refused
  std::string first_mismatch;
  bool ok() const { return cases == agreed && invalid_assignments == 0; }
};

// solve_matching vs the exhaustive oracle on `cases` random instances; also
// re-verifies every feasible assignment against the matching conditions.
EquivalenceResult matching_oracle_equivalence(std::uint64_t seed, std::uint64_t cases,
                                              std::uint32_t max_objects,
                                              std::uint32_t max_nodes,
                                              std::uint32_t max_rate);

// check_expansion vs brute-force subset enumeration on `cases` random graphs.
EquivalenceResult expansion_oracle_equivalence(std::uint64_t seed, std::uint64_t cases,
                                               std::uint32_t max_objects,
                                               std::uint32_t max_nodes);

struct SketchCheckResult {
  bool no_underestimate = true;
  std::uint64_t queries = 0;
  std::uint32_t top10_overlap_min = 10;  // min across seeds
  bool ok() const { return no_underestimate && top10_overlap_min >= 9; }
};

// Count-Min no-underestimation against an exact counter shadow, plus top-10
// overlap of the heavy-hitter report against exact frequencies.
SketchCheckResult sketch_check(std::uint64_t seed, std::uint64_t queries,
                               std::uint32_t hh_seeds);

}  // namespace distcache::selfcheck
