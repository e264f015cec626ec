#include <doctest.h>

#include <sstream>

#include "distcache/experiments.hpp"
#include "distcache/sim.hpp"

using namespace distcache;

namespace {

SystemConfig small_config(std::uint64_t master_seed) {
  SystemConfig cfg;
  cfg.spine_count = 4;
  cfg.rack_count = 4;
  cfg.servers_per_rack = 4;
  cfg.client_racks = 4;
  cfg.server_rate = 200.0;
  cfg.cache_rate_factor = 4.0;
  cfg.universe = 50'000;
  cfg.seeds = Seeds::derive(master_seed);
  return cfg;
}

LossSimParams basic_params(double rate, double skew, double write_ratio,
                           std::uint64_t workload_seed) {
  LossSimParams params;
  params.offered_rate = rate;
  params.horizon = 6 * kSecond;
  params.workload.universe = 50'000;
  params.workload.skew = skew;
  params.workload.write_ratio = write_ratio;
  params.workload.seed = workload_seed;
  params.budgets = {50, 50, std::nullopt};
  return params;
}

}  // namespace

TEST_SUITE_BEGIN("sim");

TEST_CASE("offered load zero-ish: nothing served, conservation trivially holds") {
  auto cfg = small_config(1);
  auto params = basic_params(0.001, 0.0, 0.0, cfg.seeds.workload);
  Simulation sim(cfg, PolicyKind::kNoCache, params);
  const auto report = sim.run();
  CHECK(report.arrived == 0);  // first arrival lands beyond the horizon
  CHECK(report.served == 0);
  CHECK(report.conservation_holds());
}

TEST_CASE("single rack, single server: saturating uncached load serves at rate T") {
  SystemConfig cfg;
  cfg.spine_count = 1;
  cfg.rack_count = 1;
  cfg.servers_per_rack = 1;
  cfg.client_racks = 1;
  cfg.server_rate = 500.0;
  cfg.cache_rate_factor = 8.0;
  cfg.universe = 10'000;
  cfg.seeds = Seeds::derive(77);
  LossSimParams params = basic_params(5000.0, 0.0, 0.0, cfg.seeds.workload);
  params.horizon = 10 * kSecond;
  Simulation sim(cfg, PolicyKind::kNoCache, params);
  const auto report = sim.run();
  CHECK(report.normalized_throughput == doctest::Approx(1.0).epsilon(0.02));
  CHECK(report.conservation_holds());
  CHECK(report.dropped > 0);
}

TEST_CASE("conservation holds under a mixed cached workload") {
  auto cfg = small_config(3);
  auto params = basic_params(2000.0, 0.99, 0.1, cfg.seeds.workload);
  params.refresh_enabled = true;
  Simulation sim(cfg, PolicyKind::kPot, params);
  const auto report = sim.run();
  CHECK(report.arrived > 0);
  CHECK(report.conservation_holds());
  CHECK(report.cache_hits > 0);
  CHECK(report.sets > 0);
  CHECK(report.coherence.updates_sent > 0);
  CHECK(report.stale_reads == 0);
}

TEST_CASE("no node serves above its configured rate in any one-second window") {
  auto cfg = small_config(5);
  auto params = basic_params(3000.0, 0.99, 0.0, cfg.seeds.workload);
  Simulation sim(cfg, PolicyKind::kPot, params);
  const auto report = sim.run();
  const std::uint32_t caches = report.cache_node_count;
  const std::size_t samples_per_second =
      static_cast<std::size_t>(kSecond / report.sample_interval);
  for (std::uint32_t node = 0; node < report.node_served_per_sample.size(); ++node) {
    const auto& series = report.node_served_per_sample[node];
    const double rate = node < caches ? cfg.cache_rate() : cfg.server_rate;
    for (std::size_t start = 0; start + samples_per_second <= series.size();
         start += samples_per_second) {
      std::uint64_t window = 0;
      for (std::size_t i = start; i < start + samples_per_second; ++i)
        window += series[i];
      CHECK(window <= static_cast<std::uint64_t>(rate) + 1);
    }
  }
}

TEST_CASE("identical seeds give byte-identical reports; different seeds differ") {
  auto cfg = small_config(9);
  auto params = basic_params(1500.0, 0.9, 0.05, cfg.seeds.workload);
  const auto a = Simulation(cfg, PolicyKind::kPot, params).run();
  const auto b = Simulation(cfg, PolicyKind::kPot, params).run();
  CHECK(a.summary_json() == b.summary_json());
  std::ostringstream csv_a, csv_b;
  a.write_csv(csv_a);
  b.write_csv(csv_b);
  CHECK(csv_a.str() == csv_b.str());

  auto cfg2 = small_config(10);
  auto params2 = basic_params(1500.0, 0.9, 0.05, cfg2.seeds.workload);
  const auto c = Simulation(cfg2, PolicyKind::kPot, params2).run();
  CHECK(a.summary_json() != c.summary_json());
}

TEST_CASE("telemetry keeps flowing: load tables see nonzero loads via replies") {
  auto cfg = small_config(11);
  auto params = basic_params(2000.0, 0.99, 0.0, cfg.seeds.workload);
  Simulation sim(cfg, PolicyKind::kPot, params);
  const auto report = sim.run();
  // POT with live telemetry keeps both copies busy: hits spread across the
  // two layers rather than pinning one.
  std::uint64_t upper_served = 0, lower_served = 0;
  for (std::uint32_t n = 0; n < cfg.spine_count; ++n)
    upper_served += report.node_totals[n].served;
  for (std::uint32_t n = cfg.spine_count; n < report.cache_node_count; ++n)
    lower_served += report.node_totals[n].served;
  CHECK(upper_served > 0);
  CHECK(lower_served > 0);
}

TEST_CASE("failure injection: unknown node rejected; zero-traffic fail/recover is a "
          "no-op on metrics") {
  auto cfg = small_config(13);
  auto params = basic_params(100.0, 0.0, 0.0, cfg.seeds.workload);
  params.offered_rate = 1e-6;  // effectively no traffic
  Simulation sim(cfg, PolicyKind::kPot, params);
  CHECK_THROWS_AS(sim.inject_failure(99, kSecond), std::invalid_argument);
  sim.inject_failure(0, kSecond);
  sim.recover(0, 3 * kSecond);
  const auto report = sim.run();
  CHECK(report.arrived == 0);
  CHECK(report.served == 0);
  CHECK(report.dropped == 0);
  CHECK(report.conservation_holds());
}

TEST_CASE("failing spines drops throughput; remap restores it at half load") {
  auto cfg = small_config(17);
  auto params = basic_params(1600.0, 0.99, 0.0, cfg.seeds.workload);
  params.horizon = 12 * kSecond;
  Simulation sim(cfg, PolicyKind::kPot, params);
  sim.inject_failure(0, 4 * kSecond);
  const auto report = sim.run();
  auto window_served = [&](double from, double to) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < report.sample_time_s.size(); ++i) {
      if (report.sample_time_s[i] <= from || report.sample_time_s[i] > to) continue;
      sum += static_cast<double>(report.served_per_sample[i]);
      ++n;
    }
    return sum / std::max(n, 1);
  };
  const double before = window_served(2.0, 4.0);
  const double during = window_served(4.1, 4.9);
  const double after = window_served(6.0, 11.5);
  CHECK(during < before);
  CHECK(after == doctest::Approx(before).epsilon(0.03));
  CHECK(report.conservation_holds());
}

TEST_CASE("queue sim: no arrivals is stationary with zero trend") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(2, 2, {{0, 0}, {1, 1}},
                                      {ObjectId::from_u64(0), ObjectId::from_u64(1)});
  inst.rates = {0.0, 0.0};
  inst.capacities.assign(4, 10.0);
  QueueSimParams params;
  params.horizon = 50 * kSecond;
  const auto report = run_queue_sim(inst, params);
  const auto verdict = queue_stationarity_probe(report, 100);
  CHECK(verdict.stationary);
  CHECK(verdict.trend == doctest::Approx(0.0));
}

TEST_CASE("queue sim: PoT at half load is stationary with small queues") {
  // 16 uniform objects over 4+4 nodes at half the one-layer capacity.
  std::vector<ObjectId> keys;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  Rng rng(4);
  for (std::uint32_t i = 0; i < 16; ++i) {
    keys.push_back(ObjectId::from_u64(i));
    pairs.emplace_back(static_cast<std::uint32_t>(rng.next_below(4)),
                       static_cast<std::uint32_t>(rng.next_below(4)));
  }
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(4, 4, pairs, keys);
  const double capacity = 40.0;
  inst.capacities.assign(8, capacity);
  const double total = 0.5 * 4 * capacity;  // rho = 0.5 on one layer
  inst.rates.assign(16, total / 16.0);
  QueueSimParams params;
  params.horizon = 200 * kSecond;
  params.seed = 21;
  const auto report = run_queue_sim(inst, params);
  const auto verdict = queue_stationarity_probe(report, 500);
  CHECK(verdict.stationary);
  // Sanity: JSQ(2) at effective per-node rho <= 0.5 keeps mean queues below
  // the M/M/1 rho/(1-rho) = 1 benchmark.
  double mean = 0.0;
  for (double q : report.mean_queue_per_sample) mean += q;
  mean /= static_cast<double>(report.mean_queue_per_sample.size());
  CHECK(mean < 1.0);
}

TEST_CASE("queue sim: single-hash overload is non-stationary with positive trend") {
  // 8 unit-rate objects on 4 nodes of capacity 1.5: some node holds >= 2.
  std::vector<ObjectId> keys;
  for (std::uint32_t i = 0; i < 8; ++i) keys.push_back(ObjectId::from_u64(i));
  MatchingInstance inst;
  inst.graph = build_graph_single_hash(5, 4, keys);
  inst.rates.assign(8, 1.0);
  inst.capacities.assign(4, 1.5);
  QueueSimParams params;
  params.horizon = 400 * kSecond;
  params.seed = 31;
  const auto report = run_queue_sim(inst, params);
  const auto verdict = queue_stationarity_probe(report, 200);
  CHECK_FALSE(verdict.stationary);
  CHECK(verdict.trend > 0.0);
}

TEST_CASE("stationarity probe rejects too-short horizons") {
  MatchingInstance inst;
  inst.graph = build_graph_from_pairs(1, 1, {{0, 0}}, {ObjectId::from_u64(0)});
  inst.rates = {1.0};
  inst.capacities.assign(2, 10.0);
  QueueSimParams params;
  params.horizon = 2 * kSecond;
  const auto report = run_queue_sim(inst, params);
  CHECK_THROWS_AS(queue_stationarity_probe(report, 100), std::runtime_error);
}

TEST_SUITE_END();
