#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distcache/config.hpp"
#include "distcache/routing.hpp"
#include "distcache/sim.hpp"

namespace distcache {

// One experiment sweep: which suite, which axes, which seeds. Every source of
// randomness is an explicit seed; re-running a spec reproduces byte-identical
// CSVs regardless of worker count.
struct ExperimentSpec {
  std::string name = "all";
  std::vector<PolicyKind> policies = {PolicyKind::kNoCache, PolicyKind::kPartitionOnly,
                                      PolicyKind::kReplication, PolicyKind::kPot};
  std::vector<double> skews = {0.0, 0.9, 0.95, 0.99};
  std::vector<std::size_t> cache_sizes = {10, 50, 100, 500};
  std::vector<double> write_ratios = {0.0, 0.02, 0.05, 0.1, 0.2, 0.5};
  std::vector<std::uint32_t> rack_counts = {2, 4, 6, 8};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  SystemConfig base;
  std::size_t cache_budget = 100;  // objects per cache node outside sweeps
  double horizon_s = 8.0;
  double loss_threshold = 0.99;  // delivered ratio deciding "sustained"
  std::string out_dir = "out";
  std::uint32_t workers = 0;  // 0: DISTCACHE_WORKERS env or hardware
  bool deterministic = false; // force one worker
};

// Flat `key = value` file with [section] headers; `#` comments. Unknown keys
// are an error (catches typos); malformed lines report their line number.
ExperimentSpec parse_spec_file(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;
  std::vector<std::string> files;  // CSVs written
  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Largest offered rate (normalized to one server's rate) the configured
// system sustains with delivered ratio >= threshold, by bisection.
double measure_saturation(const SystemConfig& config, PolicyKind policy,
                          const WorkloadSpec& workload, const HotBudgets& budgets,
                          double horizon_s, double threshold);

// Figure analogs. Each writes its raw (and where useful, summary) CSV under
// spec.out_dir and returns threshold checks.
SuiteResult run_fig8a(const ExperimentSpec& spec);  // throughput vs skew
SuiteResult run_fig8b(const ExperimentSpec& spec);  // throughput vs cache size
SuiteResult run_fig8c(const ExperimentSpec& spec);  // throughput vs scale
SuiteResult run_fig9(const ExperimentSpec& spec, double skew, std::size_t cache_size,
                     const std::string& label);     // throughput vs write ratio
SuiteResult run_fig9a(const ExperimentSpec& spec);
SuiteResult run_fig9b(const ExperimentSpec& spec);
SuiteResult run_fig10(const ExperimentSpec& spec);  // failure time series

// Theory probes.
SuiteResult run_lemma1(const ExperimentSpec& spec);  // feasibility rate
SuiteResult run_lemma2(const ExperimentSpec& spec);  // PoT stationarity rate
SuiteResult run_lemma3(const ExperimentSpec& spec);  // single-hash overload rate
SuiteResult run_coherence_suite(const ExperimentSpec& spec);
SuiteResult run_sketch_suite(const ExperimentSpec& spec);
SuiteResult run_determinism_suite(const ExperimentSpec& spec);
SuiteResult run_selftest(const ExperimentSpec& spec);  // oracle equivalences

// name -> suite; throws std::invalid_argument for unknown names.
SuiteResult run_suite(const std::string& name, const ExperimentSpec& spec);
std::vector<std::string> suite_names();

// Builders shared by the lemma probes and tests.
MatchingInstance lemma1_instance(std::uint64_t seed, std::uint32_t m, double skew,
                                 double utilization, double capacity);
MatchingInstance lemma3_instance(std::uint64_t seed, std::uint32_t keys,
                                 std::uint32_t pool, double capacity);

}  // namespace distcache
