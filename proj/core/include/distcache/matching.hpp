#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "distcache/hashing.hpp"
#include "distcache/workload.hpp"

namespace distcache {

// Rates and capacities are scaled to 64-bit integers with this fixed
// denominator before solving, so feasibility decisions are exact and never
// flap on float rounding. Tolerances elsewhere refer to this quantum.
inline constexpr std::int64_t kRateScale = 1'000'000;

struct MatchingInstance {
  BipartiteGraph graph;
  std::vector<double> rates;       // r_i = p_i * R per object, queries/sec
  std::vector<double> capacities;  // per cache node, queries/sec

  std::uint32_t object_count() const { return graph.object_count(); }
  std::uint32_t node_count() const { return graph.node_count(); }
  double demand() const;
  double capacity_total() const;
  void validate() const;  // throws std::invalid_argument on malformed input
};

MatchingInstance make_instance(BipartiteGraph graph, const QueryDistribution& dist,
                               double total_rate, double uniform_capacity);

// Hall-style infeasibility witness: a set of objects whose total rate exceeds
// the total capacity of its neighborhood.
struct CutWitness {
  std::vector<std::uint32_t> objects;
  std::vector<std::uint32_t> nodes;  // neighborhood of `objects`
  double demand = 0.0;
  double capacity = 0.0;
};

struct MatchingAssignment {
  bool feasible = false;
  // Edge weights, unscaled (queries/sec). lower_weight is empty in
  // single-hash mode.
  std::vector<double> upper_weight;
  std::vector<double> lower_weight;
  double max_flow = 0.0;
  double demand = 0.0;
  std::optional<CutWitness> witness;  // set when infeasible
};

// Decides whether a perfect fractional matching exists (every object's rate
// fully served, no node above capacity) by exact max-flow on scaled integers,
// and returns one when it does. Infeasible is a normal outcome, not an error.
MatchingAssignment solve_matching(const MatchingInstance& inst);

// Independent checker pass for the two matching conditions; returns the worst
// violation found (0 when the assignment is valid). Tolerance is expressed in
// units of the scaling quantum.
struct AssignmentCheck {
  bool valid = false;
  double worst_object_residual = 0.0;  // |sum_w - r_i| max over objects
  double worst_node_excess = 0.0;      // max over nodes of (sum_w - T), floored at 0
};
AssignmentCheck verify_assignment(const MatchingInstance& inst,
                                  const MatchingAssignment& asg);

struct ExpansionResult {
  bool holds = false;
  // On failure: a deficient set S with |Gamma(S)| < |S| (object indices).
  std::vector<std::uint32_t> witness;
};

// Expansion property |Gamma(S)| >= |S| for all S, decided via a maximum
// unweighted matching saturating U (Hall's theorem).
ExpansionResult check_expansion(const BipartiteGraph& g);

struct IntensityEntry {
  std::vector<std::uint32_t> subset;  // node ids
  double lambda_sum = 0.0;
  double mu = 0.0;
  double rho = 0.0;
};

struct IntensityReport {
  std::vector<IntensityEntry> pair_entries;   // one per pair {a, b} with lambda > 0
  std::vector<IntensityEntry> extra_entries;  // layers, full set, sampled subsets
  double rho_max = 0.0;
  // D(i): the node pair of object i (upper id, lower id).
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_of_object;
};

inline constexpr std::uint32_t kMaxExhaustiveIntensityNodes = 24;

// Exhaustive evaluation of rho_Q over all nonempty node subsets. Refuses
// graphs above kMaxExhaustiveIntensityNodes with std::length_error; use the
// sampled variant there.
IntensityReport traffic_intensity(const MatchingInstance& inst);

// Evaluates all pairs, the two layers, the full set, and `subset_count`
// seeded random subsets. rho_max is a lower bound on the exhaustive value.
IntensityReport traffic_intensity_sampled(const MatchingInstance& inst,
                                          std::uint32_t subset_count,
                                          std::uint64_t seed);

// Line-oriented text format: `m0 m1 k capacity scale` header, then one
// `object-index h0 h1 rate` row per object. `#` starts a comment.
void write_instance(std::ostream& out, const MatchingInstance& inst);
MatchingInstance read_instance(std::istream& in);
MatchingInstance read_instance_file(const std::string& path);

}  // namespace distcache
