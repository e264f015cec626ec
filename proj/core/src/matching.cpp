#include "distcache/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "distcache/rng.hpp"

namespace distcache {

double MatchingInstance::demand() const {
  double d = 0.0;
  for (double r : rates) d += r;
  return d;
}

double MatchingInstance::capacity_total() const {
  double c = 0.0;
  for (double t : capacities) c += t;
  return c;
}

void MatchingInstance::validate() const {
  if (rates.size() != graph.object_count())
    throw std::invalid_argument("MatchingInstance: rates/object mismatch");
  if (capacities.size() != graph.node_count())
    throw std::invalid_argument("MatchingInstance: capacities/node mismatch");
  for (double r : rates)
    if (!(r >= 0.0)) throw std::invalid_argument("MatchingInstance: negative rate");
  for (double c : capacities)
    if (!(c > 0.0)) throw std::invalid_argument("MatchingInstance: capacity must be > 0");
}

MatchingInstance make_instance(BipartiteGraph graph, const QueryDistribution& dist,
                               double total_rate, double uniform_capacity) {
  if (dist.size() != graph.object_count())
    throw std::invalid_argument("make_instance: distribution size != object count");
  MatchingInstance inst;
  inst.rates.reserve(dist.size());
  for (double p : dist.probs) inst.rates.push_back(p * total_rate);
  inst.capacities.assign(graph.node_count(), uniform_capacity);
  inst.graph = std::move(graph);
  inst.validate();
  return inst;
}

namespace {

std::int64_t scale_quantity(double v) {
  return std::llround(v * static_cast<double>(kRateScale));
}

// Dinic max-flow on int64 capacities.
class FlowNetwork {
 public:
  explicit FlowNetwork(int n) : head_(n, -1), level_(n), iter_(n) {}

  int add_edge(int from, int to, std::int64_t cap) {
    const int id = static_cast<int>(to_.size());
    to_.push_back(to);
    cap_.push_back(cap);
    next_.push_back(head_[from]);
    head_[from] = id;
    to_.push_back(from);
    cap_.push_back(0);
    next_.push_back(head_[to]);
    head_[to] = id + 1;
    return id;
  }

  std::int64_t flow_of(int edge_id) const { return cap_[edge_id ^ 1]; }

  std::int64_t max_flow(int source, int sink) {
    std::int64_t total = 0;
    while (bfs(source, sink)) {
      iter_ = head_;
      while (std::int64_t pushed = dfs(source, sink, kInf)) total += pushed;
    }
    return total;
  }

  // After max_flow: vertices reachable from `source` in the residual graph.
  std::vector<bool> residual_reachable(int source) const {
    std::vector<bool> seen(head_.size(), false);
    std::deque<int> queue{source};
    seen[source] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int e = head_[u]; e != -1; e = next_[e]) {
        if (cap_[e] > 0 && !seen[to_[e]]) {
          seen[to_[e]] = true;
          queue.push_back(to_[e]);
        }
      }
    }
    return seen;
  }

 private:
  static constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

  bool bfs(int source, int sink) {
    std::fill(level_.begin(), level_.end(), -1);
    std::deque<int> queue{source};
    level_[source] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int e = head_[u]; e != -1; e = next_[e]) {
        if (cap_[e] > 0 && level_[to_[e]] < 0) {
          level_[to_[e]] = level_[u] + 1;
          queue.push_back(to_[e]);
        }
      }
    }
    return level_[sink] >= 0;
  }

  std::int64_t dfs(int u, int sink, std::int64_t limit) {
    if (u == sink) return limit;
    for (int& e = iter_[u]; e != -1; e = next_[e]) {
      const int v = to_[e];
      if (cap_[e] > 0 && level_[v] == level_[u] + 1) {
        const std::int64_t pushed = dfs(v, sink, std::min(limit, cap_[e]));
        if (pushed > 0) {
          cap_[e] -= pushed;
          cap_[e ^ 1] += pushed;
          return pushed;
        }
      }
    }
    level_[u] = -1;
    return 0;
  }

  std::vector<int> head_, level_, iter_, next_, to_;
  std::vector<std::int64_t> cap_;
};

double unscale(std::int64_t v) {
  return static_cast<double>(v) / static_cast<double>(kRateScale);
}

}  // namespace

MatchingAssignment solve_matching(const MatchingInstance& inst) {
  inst.validate();
  const std::uint32_t k = inst.object_count();
  const std::uint32_t v = inst.node_count();
  const int source = 0;
  const int sink = 1 + static_cast<int>(k) + static_cast<int>(v);
  FlowNetwork net(sink + 1);

  std::int64_t demand_scaled = 0;
  std::int64_t capacity_scaled_total = 0;
  std::vector<int> source_edges(k);
  std::vector<int> upper_edges(k, -1), lower_edges(k, -1);
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::int64_t r = scale_quantity(inst.rates[i]);
    demand_scaled += r;
    source_edges[i] = net.add_edge(source, 1 + static_cast<int>(i), r);
  }
  for (std::uint32_t n = 0; n < v; ++n) {
    const std::int64_t c = scale_quantity(inst.capacities[n]);
    capacity_scaled_total += c;
    net.add_edge(1 + static_cast<int>(k) + static_cast<int>(n), sink, c);
  }
  // Middle edges are left effectively uncapped: the node->sink edges already
  // enforce condition 2, so per-edge weights never exceed the node capacity,
  // and min cuts stay on source/sink edges, which keeps the infeasibility
  // witness a clean Hall violation.
  const std::int64_t middle_cap = capacity_scaled_total + 1;
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto [a, b] = inst.graph.nodes_of(i);
    upper_edges[i] =
        net.add_edge(1 + static_cast<int>(i), 1 + static_cast<int>(k) + a, middle_cap);
    if (b != BipartiteGraph::kNoNode)
      lower_edges[i] =
          net.add_edge(1 + static_cast<int>(i), 1 + static_cast<int>(k) + b, middle_cap);
  }

  MatchingAssignment asg;
  const std::int64_t flow = net.max_flow(source, sink);
  asg.max_flow = unscale(flow);
  asg.demand = unscale(demand_scaled);
  asg.feasible = flow == demand_scaled;
  asg.upper_weight.resize(k, 0.0);
  asg.lower_weight.resize(k, 0.0);
  for (std::uint32_t i = 0; i < k; ++i) {
    asg.upper_weight[i] = unscale(net.flow_of(upper_edges[i]));
    if (lower_edges[i] >= 0) asg.lower_weight[i] = unscale(net.flow_of(lower_edges[i]));
  }

  if (!asg.feasible) {
    const auto reachable = net.residual_reachable(source);
    CutWitness witness;
    for (std::uint32_t i = 0; i < k; ++i) {
      if (reachable[1 + i]) {
        witness.objects.push_back(i);
        witness.demand += inst.rates[i];
      }
    }
    witness.nodes = inst.graph.neighborhood_by_index(witness.objects);
    for (auto n : witness.nodes) witness.capacity += inst.capacities[n];
    asg.witness = std::move(witness);
  }
  return asg;
}

AssignmentCheck verify_assignment(const MatchingInstance& inst,
                                  const MatchingAssignment& asg) {
  AssignmentCheck check;
  const std::uint32_t k = inst.object_count();
  std::vector<double> node_load(inst.node_count(), 0.0);
  const double quantum = 1.0 / static_cast<double>(kRateScale);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto [a, b] = inst.graph.nodes_of(i);
    double sum = asg.upper_weight[i];
    node_load[a] += asg.upper_weight[i];
    if (b != BipartiteGraph::kNoNode) {
      sum += asg.lower_weight[i];
      node_load[b] += asg.lower_weight[i];
    }
    check.worst_object_residual =
        std::max(check.worst_object_residual, std::fabs(sum - inst.rates[i]));
  }
  for (std::uint32_t n = 0; n < inst.node_count(); ++n) {
    check.worst_node_excess =
        std::max(check.worst_node_excess, node_load[n] - inst.capacities[n]);
  }
  check.worst_node_excess = std::max(check.worst_node_excess, 0.0);
  check.valid = check.worst_object_residual <= quantum * 2.0 &&
                check.worst_node_excess <= quantum * 2.0;
  return check;
}

// --- expansion property -------------------------------------------------------

namespace {

// Hopcroft-Karp maximum matching; left side are objects, right side nodes.
class HopcroftKarp {
 public:
  HopcroftKarp(const BipartiteGraph& g)
      : g_(g),
        match_left_(g.object_count(), -1),
        match_right_(g.node_count(), -1),
        dist_(g.object_count()) {}

  int solve() {
    int matched = 0;
    while (bfs()) {
      for (std::uint32_t u = 0; u < g_.object_count(); ++u)
        if (match_left_[u] < 0 && dfs(u)) ++matched;
    }
    return matched;
  }

  const std::vector<int>& match_left() const { return match_left_; }
  const std::vector<int>& match_right() const { return match_right_; }

 private:
  static constexpr int kInf = std::numeric_limits<int>::max();

  std::pair<std::int32_t, std::int32_t> edges(std::uint32_t u) const {
    return g_.nodes_of(u);
  }

  bool bfs() {
    std::deque<std::uint32_t> queue;
    for (std::uint32_t u = 0; u < g_.object_count(); ++u) {
      if (match_left_[u] < 0) {
        dist_[u] = 0;
        queue.push_back(u);
      } else {
        dist_[u] = kInf;
      }
    }
    bool found = false;
    while (!queue.empty()) {
      const std::uint32_t u = queue.front();
      queue.pop_front();
      const auto [a, b] = edges(u);
      for (std::int32_t node : {a, b}) {
        if (node == BipartiteGraph::kNoNode) continue;
        const int w = match_right_[node];
        if (w < 0) {
          found = true;
        } else if (dist_[w] == kInf) {
          dist_[w] = dist_[u] + 1;
          queue.push_back(static_cast<std::uint32_t>(w));
        }
      }
    }
    return found;
  }

  bool dfs(std::uint32_t u) {
    const auto [a, b] = edges(u);
    for (std::int32_t node : {a, b}) {
      if (node == BipartiteGraph::kNoNode) continue;
      const int w = match_right_[node];
      if (w < 0 || (dist_[w] == dist_[u] + 1 && dfs(static_cast<std::uint32_t>(w)))) {
        match_left_[u] = node;
        match_right_[node] = static_cast<int>(u);
        return true;
      }
    }
    dist_[u] = kInf;
    return false;
  }

  const BipartiteGraph& g_;
  std::vector<int> match_left_;
  std::vector<int> match_right_;
  std::vector<int> dist_;
};

}  // namespace

ExpansionResult check_expansion(const BipartiteGraph& g) {
  HopcroftKarp hk(g);
  const int matched = hk.solve();
  ExpansionResult result;
  result.holds = matched == static_cast<int>(g.object_count());
  if (result.holds) return result;

  // Konig-style witness: alternating reachability from one unmatched object
  // yields S with |Gamma(S)| = |S| - 1.
  std::uint32_t start = 0;
  for (std::uint32_t u = 0; u < g.object_count(); ++u)
    if (hk.match_left()[u] < 0) {
      start = u;
      break;
    }
  std::vector<bool> left_seen(g.object_count(), false);
  std::vector<bool> right_seen(g.node_count(), false);
  std::deque<std::uint32_t> queue{start};
  left_seen[start] = true;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    const auto [a, b] = g.nodes_of(u);
    for (std::int32_t node : {a, b}) {
      if (node == BipartiteGraph::kNoNode || right_seen[node]) continue;
      right_seen[node] = true;
      const int w = hk.match_right()[node];
      if (w >= 0 && !left_seen[w]) {
        left_seen[w] = true;
        queue.push_back(static_cast<std::uint32_t>(w));
      }
    }
  }
  for (std::uint32_t u = 0; u < g.object_count(); ++u)
    if (left_seen[u]) result.witness.push_back(u);
  return result;
}

// --- traffic intensity --------------------------------------------------------

namespace {

struct PairRates {
  // lambda[a][b] over upper a, lower b (local lower index).
  std::vector<std::vector<double>> lambda;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_of_object;
};

PairRates pair_rates(const MatchingInstance& inst) {
  if (inst.graph.single_hash())
    throw std::invalid_argument("traffic_intensity: requires a two-hash graph");
  PairRates pr;
  const std::uint32_t m0 = inst.graph.upper_count();
  const std::uint32_t m1 = inst.graph.lower_count();
  pr.lambda.assign(m0, std::vector<double>(m1, 0.0));
  pr.pair_of_object.reserve(inst.object_count());
  for (std::uint32_t i = 0; i < inst.object_count(); ++i) {
    const auto [a, b] = inst.graph.nodes_of(i);
    pr.lambda[a][b - m0] += inst.rates[i];
    pr.pair_of_object.emplace_back(static_cast<std::uint32_t>(a),
                                   static_cast<std::uint32_t>(b));
  }
  return pr;
}

IntensityEntry evaluate_subset(const MatchingInstance& inst, const PairRates& pr,
                               std::vector<std::uint32_t> subset) {
  const std::uint32_t m0 = inst.graph.upper_count();
  IntensityEntry entry;
  std::vector<bool> in_q(inst.node_count(), false);
  for (auto n : subset) {
    in_q[n] = true;
    entry.mu += inst.capacities[n];
  }
  for (std::uint32_t a = 0; a < m0; ++a) {
    if (!in_q[a]) continue;
    for (std::uint32_t b = 0; b < inst.graph.lower_count(); ++b) {
      if (in_q[m0 + b]) entry.lambda_sum += pr.lambda[a][b];
    }
  }
  entry.rho = entry.mu > 0.0 ? entry.lambda_sum / entry.mu : 0.0;
  entry.subset = std::move(subset);
  return entry;
}

void collect_common_entries(const MatchingInstance& inst, const PairRates& pr,
                            IntensityReport& report) {
  const std::uint32_t m0 = inst.graph.upper_count();
  const std::uint32_t m1 = inst.graph.lower_count();
  for (std::uint32_t a = 0; a < m0; ++a) {
    for (std::uint32_t b = 0; b < m1; ++b) {
      if (pr.lambda[a][b] <= 0.0) continue;
      IntensityEntry entry;
      entry.subset = {a, m0 + b};
      entry.lambda_sum = pr.lambda[a][b];
      entry.mu = inst.capacities[a] + inst.capacities[m0 + b];
      entry.rho = entry.lambda_sum / entry.mu;
      report.rho_max = std::max(report.rho_max, entry.rho);
      report.pair_entries.push_back(std::move(entry));
    }
  }
  std::vector<std::uint32_t> full(inst.node_count());
  for (std::uint32_t n = 0; n < inst.node_count(); ++n) full[n] = n;
  auto full_entry = evaluate_subset(inst, pr, std::move(full));
  report.rho_max = std::max(report.rho_max, full_entry.rho);
  report.extra_entries.push_back(std::move(full_entry));
}

}  // namespace

IntensityReport traffic_intensity(const MatchingInstance& inst) {
  inst.validate();
  const std::uint32_t v = inst.node_count();
  if (v > kMaxExhaustiveIntensityNodes)
    throw std::length_error(
        "traffic_intensity: node count exceeds exhaustive bound, use sampled mode");
  const PairRates pr = pair_rates(inst);
  IntensityReport report;
  report.pair_of_object = pr.pair_of_object;
  if (inst.object_count() == 0) return report;
  collect_common_entries(inst, pr, report);

  // Full lambda matrix between node ids, for incremental subset updates.
  const std::uint32_t m0 = inst.graph.upper_count();
  std::vector<std::vector<double>> lam(v, std::vector<double>(v, 0.0));
  for (std::uint32_t a = 0; a < m0; ++a) {
    for (std::uint32_t b = 0; b + m0 < v; ++b) {
      lam[a][m0 + b] = pr.lambda[a][b];
      lam[m0 + b][a] = pr.lambda[a][b];
    }
  }

  // Gray-code walk over all subsets: one node toggles per step.
  std::vector<bool> in_q(v, false);
  double lambda_sum = 0.0;
  double mu = 0.0;
  const std::uint64_t total = 1ULL << v;
  std::uint64_t gray_prev = 0;
  for (std::uint64_t i = 1; i < total; ++i) {
    const std::uint64_t gray = i ^ (i >> 1);
    const std::uint64_t diff = gray ^ gray_prev;
    gray_prev = gray;
    const int bit = std::countr_zero(diff);
    double delta = 0.0;
    for (std::uint32_t n = 0; n < v; ++n)
      if (in_q[n]) delta += lam[bit][n];
    if (in_q[bit]) {
      in_q[bit] = false;
      lambda_sum -= delta;
      mu -= inst.capacities[bit];
    } else {
      in_q[bit] = true;
      lambda_sum += delta;
      mu += inst.capacities[bit];
    }
    if (mu > 0.0) report.rho_max = std::max(report.rho_max, lambda_sum / mu);
  }
  return report;
}

IntensityReport traffic_intensity_sampled(const MatchingInstance& inst,
                                          std::uint32_t subset_count,
                                          std::uint64_t seed) {
  inst.validate();
  const PairRates pr = pair_rates(inst);
  IntensityReport report;
  report.pair_of_object = pr.pair_of_object;
  if (inst.object_count() == 0) return report;
  collect_common_entries(inst, pr, report);

  const std::uint32_t v = inst.node_count();
  const std::uint32_t m0 = inst.graph.upper_count();
  std::vector<std::uint32_t> layer_a, layer_b;
  for (std::uint32_t n = 0; n < v; ++n) (n < m0 ? layer_a : layer_b).push_back(n);
  for (auto& layer : {layer_a, layer_b}) {
    auto entry = evaluate_subset(inst, pr, layer);
    report.rho_max = std::max(report.rho_max, entry.rho);
    report.extra_entries.push_back(std::move(entry));
  }

  Rng rng(mix64(seed, 0x1f71e5171e5ULL));
  for (std::uint32_t s = 0; s < subset_count; ++s) {
    std::vector<std::uint32_t> subset;
    for (std::uint32_t n = 0; n < v; ++n)
      if (rng.next_bool(0.5)) subset.push_back(n);
    if (subset.empty()) subset.push_back(static_cast<std::uint32_t>(rng.next_below(v)));
    auto entry = evaluate_subset(inst, pr, std::move(subset));
    report.rho_max = std::max(report.rho_max, entry.rho);
    report.extra_entries.push_back(std::move(entry));
  }
  return report;
}

// --- text format ----------------------------------------------------------------

void write_instance(std::ostream& out, const MatchingInstance& inst) {
  inst.validate();
  if (inst.graph.single_hash())
    throw std::invalid_argument("write_instance: requires a two-hash graph");
  double cap = inst.capacities.empty() ? 0.0 : inst.capacities[0];
  for (double c : inst.capacities)
    if (c != cap)
      throw std::invalid_argument("write_instance: text format requires uniform capacity");
  out << "# distcache matching instance\n";
  out << inst.graph.upper_count() << ' ' << inst.graph.lower_count() << ' '
      << inst.object_count() << ' ' << cap << ' ' << kRateScale << '\n';
  const std::uint32_t m0 = inst.graph.upper_count();
  for (std::uint32_t i = 0; i < inst.object_count(); ++i) {
    const auto [a, b] = inst.graph.nodes_of(i);
    out << i << ' ' << a << ' ' << (b - static_cast<std::int32_t>(m0)) << ' '
        << inst.rates[i] << '\n';
  }
}

namespace {
[[noreturn]] void format_error(int line, const std::string& message) {
  throw std::runtime_error("instance line " + std::to_string(line) + ": " + message);
}
}  // namespace

MatchingInstance read_instance(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_content_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (!blank) return true;
    }
    if (required) format_error(line_no + 1, "unexpected end of file");
    return false;
  };

  next_content_line(true);
  std::istringstream header(line);
  std::uint32_t m0 = 0, m1 = 0, k = 0;
  double cap = 0.0;
  std::int64_t scale = 0;
  if (!(header >> m0 >> m1 >> k >> cap >> scale))
    format_error(line_no, "expected header: m0 m1 k capacity scale");
  if (m0 == 0 || m1 == 0) format_error(line_no, "node counts must be >= 1");
  if (scale != kRateScale)
    format_error(line_no, "unsupported scale (expected " + std::to_string(kRateScale) + ")");

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(k);
  std::vector<double> rates(k);
  std::vector<bool> seen(k, false);
  for (std::uint32_t row = 0; row < k; ++row) {
    next_content_line(true);
    std::istringstream fields(line);
    std::uint32_t index = 0, h0 = 0, h1 = 0;
    double rate = 0.0;
    if (!(fields >> index >> h0 >> h1 >> rate))
      format_error(line_no, "expected row: object-index h0 h1 rate");
    if (index >= k) format_error(line_no, "object index out of range");
    if (seen[index]) format_error(line_no, "duplicate object index");
    if (h0 >= m0 || h1 >= m1) format_error(line_no, "hash bucket out of range");
    if (rate < 0.0) format_error(line_no, "negative rate");
    seen[index] = true;
    pairs[index] = {h0, h1};
    rates[index] = rate;
  }

  // Rebuild the graph through a pair-faithful partitioner substitute: objects
  // are synthetic ids, adjacency comes straight from the file.
  std::vector<ObjectId> objects;
  objects.reserve(k);
  for (std::uint32_t i = 0; i < k; ++i) objects.push_back(ObjectId::from_u64(i));
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(m0, m1, pairs, objects);
  inst.rates = std::move(rates);
  inst.capacities.assign(m0 + m1, cap);
  inst.validate();
  return inst;
}

MatchingInstance read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  return read_instance(in);
}

}  // namespace distcache
