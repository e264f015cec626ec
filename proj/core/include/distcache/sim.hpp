#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "distcache/allocation.hpp"
#include "distcache/coherence.hpp"
#include "distcache/config.hpp"
#include "distcache/matching.hpp"
#include "distcache/routing.hpp"
#include "distcache/workload.hpp"

namespace distcache {

// Simulated time in integer nanoseconds; event ordering is exact.
using SimTime = std::int64_t;
inline constexpr SimTime kMillisecond = 1'000'000;
inline constexpr SimTime kSecond = 1'000'000'000;

enum class ArrivalProcess : std::uint8_t { kDeterministic, kPoisson };

struct FaultPlan {
  double coherence_drop_prob = 0.0;  // applied per coherence message delivery
  double coherence_dup_prob = 0.0;   // duplicate delivery with jitter
  SimTime dup_jitter = 2 * kMillisecond;
};

// Parameters of one loss-mode run: bounded queues, deterministic service,
// drops counted. This is the operating mode of the throughput experiments.
struct LossSimParams {
  double offered_rate = 1000.0;  // R, queries/sec
  SimTime horizon = 10 * kSecond;
  ArrivalProcess arrivals = ArrivalProcess::kDeterministic;
  WorkloadSpec workload;
  HotBudgets budgets;
  bool prepopulate = true;
  bool refresh_enabled = false;
  std::size_t report_width = 256;
  std::size_t queue_capacity = 128;
  SimTime link_delay = 10'000;  // 10 us per hop
  SimTime sample_interval = 100 * kMillisecond;
  SimTime detection_delay = kSecond;  // failure -> remap completion
  SimTime measure_from = 2 * kSecond; // steady-state summary window start
  ServerOptions server_options;
  FaultPlan faults;
};

struct NodeTotals {
  std::uint64_t arrived = 0;
  std::uint64_t served = 0;
  std::uint64_t dropped = 0;
  std::uint32_t queue_max = 0;
};

struct CoherenceCounters {
  std::uint64_t invalidations_sent = 0;
  std::uint64_t updates_sent = 0;
  std::uint64_t inv_acks = 0;
  std::uint64_t upd_acks = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t messages_dropped = 0;
  std::uint64_t messages_duplicated = 0;
  std::uint64_t stale_updates_rejected = 0;
};

// Run output: global per-100ms series, per-node series and totals, protocol
// counters, and the conservation ledger (arrived = served + dropped + failed
// + in flight, per node and globally).
struct SimReport {
  SimTime horizon = 0;
  SimTime sample_interval = 0;
  std::string policy;
  std::uint64_t seed = 0;
  std::uint64_t config_fingerprint = 0;

  std::vector<double> sample_time_s;
  std::vector<std::uint64_t> arrived_per_sample;
  std::vector<std::uint64_t> served_per_sample;
  std::vector<std::uint64_t> dropped_per_sample;
  std::vector<double> mean_queue_per_sample;  // mean over cache nodes
  std::vector<std::uint32_t> max_queue_per_sample;

  // Cache nodes first (upper then lower), then servers (loss mode only).
  std::vector<NodeTotals> node_totals;
  std::vector<std::vector<std::uint32_t>> node_served_per_sample;
  std::vector<std::vector<std::uint32_t>> node_dropped_per_sample;
  std::vector<std::vector<std::uint32_t>> node_queue_max_per_sample;
  std::uint32_t cache_node_count = 0;

  std::uint64_t arrived = 0;
  std::uint64_t served = 0;
  std::uint64_t dropped = 0;
  std::uint64_t failed_writes = 0;
  std::uint64_t in_flight_at_end = 0;

  std::uint64_t gets = 0;
  std::uint64_t sets = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  CoherenceCounters coherence;
  std::uint64_t stale_reads = 0;
  std::uint64_t checked_reads = 0;

  double normalized_throughput = 0.0;  // steady-state served rate / T
  double delivered_ratio = 1.0;        // served / arrived over measure window
  double hit_ratio = 0.0;

  bool conservation_holds() const {
    return arrived == served + dropped + failed_writes + in_flight_at_end;
  }

  // One row per 100 ms sample: time, arrivals, served, dropped, queue stats.
  void write_csv(std::ostream& out) const;
  std::string summary_json() const;
};

// Deterministic leaf-spine system simulator (loss mode). Construction wires
// topology, policy, workload and caches; failures are injected before run().
class Simulation {
 public:
  Simulation(const SystemConfig& config, PolicyKind policy, const LossSimParams& params);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  // Cache node ids: uppers [0, m0), lowers [m0, m0+m1).
  void inject_failure(std::uint32_t cache_node, SimTime at);
  void recover(std::uint32_t cache_node, SimTime at);

  SimReport run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Queue-mode run over the cache layer only: Poisson arrivals split per
// object, unbounded FIFO queues, exponential service at each node's capacity.
// Power-of-two-choices joins the shorter queue of the object's designated
// pair (ties random); degree-1 graphs route to the single designated node.
struct QueueSimParams {
  SimTime horizon = 200 * kSecond;
  std::uint64_t seed = 1;
  SimTime sample_interval = 100 * kMillisecond;
};

SimReport run_queue_sim(const MatchingInstance& inst, const QueueSimParams& params);

struct StationarityVerdict {
  bool stationary = false;
  double trend = 0.0;          // LS slope of mean queue length, per second
  double quarter_rel_diff = 0.0;
  std::uint32_t max_queue = 0;
};

// Stationary iff the mean queue length over the final quarter of the horizon
// is within 10% of the third quarter's mean AND no queue exceeded `bound`.
// Throws std::runtime_error when the series is too short to judge.
StationarityVerdict queue_stationarity_probe(const SimReport& report,
                                             std::uint32_t max_queue_bound);

}  // namespace distcache
