#include "distcache/selfcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

#include "distcache/rng.hpp"
#include "distcache/sketch.hpp"
#include "distcache/workload.hpp"

namespace distcache::selfcheck {

namespace {

// DFS over integer splits x_i in [0, r_i] of each object's rate to its upper
// node (the rest goes lower), pruning as soon as a node exceeds capacity.
bool split_dfs(const MatchingInstance& inst, const std::vector<std::int64_t>& rates,
               const std::vector<std::int64_t>& caps, std::vector<std::int64_t>& load,
               std::uint32_t i) {
  if (i == inst.object_count()) return true;
  const auto [a, b] = inst.graph.nodes_of(i);
  for (std::int64_t x = rates[i]; x >= 0; --x) {
    const std::int64_t rest = rates[i] - x;
    if (load[a] + x > caps[a]) continue;
    if (b != BipartiteGraph::kNoNode && load[b] + rest > caps[b]) continue;
    if (b == BipartiteGraph::kNoNode && rest > 0) continue;
    load[a] += x;
    if (b != BipartiteGraph::kNoNode) load[b] += rest;
    if (split_dfs(inst, rates, caps, load, i + 1)) return true;
    load[a] -= x;
    if (b != BipartiteGraph::kNoNode) load[b] -= rest;
  }
  return false;
}

}  // namespace

bool exhaustive_flow_feasible(const MatchingInstance& inst) {
  std::vector<std::int64_t> rates(inst.object_count());
  std::vector<std::int64_t> caps(inst.node_count());
  for (std::uint32_t i = 0; i < inst.object_count(); ++i) {
    rates[i] = std::llround(inst.rates[i]);
    if (std::abs(inst.rates[i] - static_cast<double>(rates[i])) > 1e-9)
      throw std::invalid_argument("exhaustive oracle: rates must be integers");
  }
  for (std::uint32_t n = 0; n < inst.node_count(); ++n) {
    caps[n] = std::llround(inst.capacities[n]);
    if (std::abs(inst.capacities[n] - static_cast<double>(caps[n])) > 1e-9)
      throw std::invalid_argument("exhaustive oracle: capacities must be integers");
  }
  std::vector<std::int64_t> load(inst.node_count(), 0);
  return split_dfs(inst, rates, caps, load, 0);
}

bool expansion_brute_force(const BipartiteGraph& g) {
  const std::uint32_t k = g.object_count();
  if (k > 24) throw std::invalid_argument("expansion_brute_force: too many objects");
  for (std::uint64_t mask = 1; mask < (1ULL << k); ++mask) {
    std::uint64_t nodes = 0;
    int size = 0;
    for (std::uint32_t i = 0; i < k; ++i) {
      if (!(mask & (1ULL << i))) continue;
      ++size;
      const auto [a, b] = g.nodes_of(i);
      nodes |= 1ULL << a;
      if (b != BipartiteGraph::kNoNode) nodes |= 1ULL << b;
    }
    if (std::popcount(nodes) < size) return false;
  }
  return true;
}

MatchingInstance random_small_instance(std::uint64_t seed, std::uint32_t max_objects,
                                       std::uint32_t max_nodes, std::uint32_t max_rate) {
  Rng rng(mix64(seed, 0x0b5e55));
  const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng.next_below(max_objects));
  const std::uint32_t m0 = 1 + static_cast<std::uint32_t>(rng.next_below(max_nodes));
  const std::uint32_t m1 = 1 + static_cast<std::uint32_t>(rng.next_below(max_nodes));
  std::vector<ObjectId> objects;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < k; ++i) {
    objects.push_back(ObjectId::from_u64(mix64(seed, i)));
    pairs.emplace_back(static_cast<std::uint32_t>(rng.next_below(m0)),
                       static_cast<std::uint32_t>(rng.next_below(m1)));
  }
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(m0, m1, pairs, objects);
  for (std::uint32_t i = 0; i < k; ++i)
    inst.rates.push_back(static_cast<double>(rng.next_below(max_rate + 1)));
  const double cap = 1.0 + static_cast<double>(rng.next_below(max_rate));
  inst.capacities.assign(m0 + m1, cap);
  return inst;
}

BipartiteGraph random_small_graph(std::uint64_t seed, std::uint32_t max_objects,
                                  std::uint32_t max_nodes) {
  Rng rng(mix64(seed, 0x96af));
  const std::uint32_t k = 1 + static_cast<std::uint32_t>(rng.next_below(max_objects));
  const std::uint32_t m0 = 1 + static_cast<std::uint32_t>(rng.next_below(max_nodes));
  const std::uint32_t m1 = 1 + static_cast<std::uint32_t>(rng.next_below(max_nodes));
  std::vector<ObjectId> objects;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < k; ++i) {
    objects.push_back(ObjectId::from_u64(mix64(seed, i, 0x9)));
    pairs.emplace_back(static_cast<std::uint32_t>(rng.next_below(m0)),
                       static_cast<std::uint32_t>(rng.next_below(m1)));
  }
  return build_graph_from_pairs(m0, m1, pairs, objects);
}

EquivalenceResult matching_oracle_equivalence(std::uint64_t seed, std::uint64_t cases,
                                              std::uint32_t max_objects,
                                              std::uint32_t max_nodes,
                                              std::uint32_t max_rate) {
  EquivalenceResult result;
  for (std::uint64_t c = 0; c < cases; ++c) {
    const auto inst = random_small_instance(mix64(seed, c), max_objects, max_nodes, max_rate);
    const bool oracle = exhaustive_flow_feasible(inst);
    const auto asg = solve_matching(inst);
    ++result.cases;
    if (asg.feasible == oracle) {
      ++result.agreed;
    } else if (result.first_mismatch.empty()) {
      result.first_mismatch = "case " + std::to_string(c) + ": solver says " +
                              (asg.feasible ? "feasible" : "infeasible") +
                              ", oracle disagrees";
    }
    if (asg.feasible) {
      ++result.feasible;
      if (!verify_assignment(inst, asg).valid) ++result.invalid_assignments;
    }
  }
  return result;
}

EquivalenceResult expansion_oracle_equivalence(std::uint64_t seed, std::uint64_t cases,
                                               std::uint32_t max_objects,
                                               std::uint32_t max_nodes) {
  EquivalenceResult result;
  for (std::uint64_t c = 0; c < cases; ++c) {
    const auto graph = random_small_graph(mix64(seed, c, 0xe), max_objects, max_nodes);
    const bool oracle = expansion_brute_force(graph);
    const auto verdict = check_expansion(graph);
    ++result.cases;
    bool agreed = verdict.holds == oracle;
    if (agreed && !verdict.holds) {
      // The witness must actually be deficient.
      const auto gamma = graph.neighborhood_by_index(verdict.witness);
      agreed = gamma.size() < verdict.witness.size();
    }
    if (agreed) {
      ++result.agreed;
    } else if (result.first_mismatch.empty()) {
      result.first_mismatch = "case " + std::to_string(c);
    }
    if (verdict.holds) ++result.feasible;
  }
  return result;
}

SketchCheckResult sketch_check(std::uint64_t seed, std::uint64_t queries,
                               std::uint32_t hh_seeds) {
  SketchCheckResult result;

  // No-underestimation against an exact shadow over one epoch.
  {
    CountMinSketch cms(4, 65536, mix64(seed, 0xc));
    std::unordered_map<ObjectId, std::uint32_t, ObjectIdHash> exact;
    ZipfSampler sampler(100000, 0.99);
    Rng rng(mix64(seed, 0x5e7));
    for (std::uint64_t q = 0; q < queries; ++q) {
      const ObjectId key = ObjectId::from_u64(sampler.sample(rng));
      cms.add(key);
      auto& count = exact[key];
      if (count < CountMinSketch::kSaturated) ++count;
    }
    result.queries = queries;
    for (const auto& [key, count] : exact) {
      if (cms.estimate(key) < count) {
        result.no_underestimate = false;
        break;
      }
    }
  }

  // Heavy-hitter top-10 vs exact top-10 over hh_seeds independent streams.
  for (std::uint32_t s = 0; s < hh_seeds; ++s) {
    HeavyHitterDetector detector(0, mix64(seed, s, 0x44), {});
    std::unordered_map<ObjectId, std::uint64_t, ObjectIdHash> exact;
    ZipfSampler sampler(10000, 0.99);
    Rng rng(mix64(seed, s, 0x77));
    for (std::uint64_t q = 0; q < 100000; ++q) {
      const ObjectId key = ObjectId::from_u64(sampler.sample(rng));
      detector.observe(key);
      ++exact[key];
    }
    detector.advance_epoch({});
    const auto report = detector.top_k(10);

    std::vector<std::pair<std::uint64_t, ObjectId>> ranked;
    for (const auto& [key, count] : exact) ranked.emplace_back(count, key);
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::uint32_t overlap = 0;
    for (const auto& [key, est] : report) {
      for (std::size_t i = 0; i < std::min<std::size_t>(10, ranked.size()); ++i)
        if (ranked[i].second == key) {
          ++overlap;
          break;
        }
    }
    result.top10_overlap_min = std::min(result.top10_overlap_min, overlap);
  }
  return result;
}

}  // namespace distcache::selfcheck
