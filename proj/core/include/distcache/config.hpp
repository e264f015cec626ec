#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace distcache {

// Seed bundle: every source of randomness in a run is pinned here.
struct Seeds {
  std::uint64_t hash0 = 0x5eed0;
  std::uint64_t hash1 = 0x5eed1;
  std::uint64_t server_select = 0x5eed2;
  std::uint64_t workload = 0x5eed3;
  std::uint64_t routing = 0x5eed4;
  std::uint64_t sim = 0x5eed5;
  std::uint64_t sketch = 0x5eed6;
  std::uint64_t ring = 0x5eed7;

  // Derives a full bundle from one master seed; streams stay independent.
  static Seeds derive(std::uint64_t master);
};

// The experiment's ground truth: topology counts, rates, hot-set parameters
// and seeds. T is one storage server's rate; cache nodes run at c * T.
struct SystemConfig {
  std::uint32_t spine_count = 8;        // m0
  std::uint32_t rack_count = 8;         // m1
  std::uint32_t servers_per_rack = 8;   // l
  std::uint32_t client_racks = 8;
  double server_rate = 100.0;           // T, queries/sec
  double cache_rate_factor = 8.0;       // c, so cache rate is c * T
  std::uint64_t universe = 1'000'000;
  std::uint32_t hot_objects = 0;        // k; 0 means derived as ceil(m ln m)
  double utilization = 0.8;             // rho = R / (m * cache_rate)
  double epsilon = 0.05;                // capacity slack in theory probes
  double beta_warn = 3.0;               // warn when k > m^beta
  bool enforce_max_rate_rule = false;   // clamp p_max * R <= cache_rate / 2
  bool bypass_upper_on_lower_hit = false;
  std::uint32_t ring_vnodes = 64;
  Seeds seeds;

  double cache_rate() const { return cache_rate_factor * server_rate; }
  std::uint32_t server_count() const { return rack_count * servers_per_rack; }
  std::uint32_t cache_node_count() const { return spine_count + rack_count; }
  std::uint64_t effective_hot_objects() const;

  // Throws std::invalid_argument on inconsistent values; emits warnings (the
  // k > m^beta rule) to the returned list without refusing.
  std::vector<std::string> validate() const;

  // Stable hash over every field, stamped into result rows for audit.
  std::uint64_t fingerprint() const;
};

}  // namespace distcache
