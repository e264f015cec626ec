#include "distcache/config.hpp"

#include <cmath>
#include <stdexcept>

#include "distcache/rng.hpp"

namespace distcache {

Seeds Seeds::derive(std::uint64_t master) {
  Seeds s;
  s.hash0 = mix64(master, 0);
  s.hash1 = mix64(master, 1);
  s.server_select = mix64(master, 2);
  s.workload = mix64(master, 3);
  s.routing = mix64(master, 4);
  s.sim = mix64(master, 5);
  s.sketch = mix64(master, 6);
  s.ring = mix64(master, 7);
  return s;
}

std::uint64_t SystemConfig::effective_hot_objects() const {
  if (hot_objects > 0) return hot_objects;
  const double m = static_cast<double>(std::min(spine_count, rack_count));
  return static_cast<std::uint64_t>(std::ceil(m * std::log(std::max(m, 2.0))));
}

std::vector<std::string> SystemConfig::validate() const {
  if (spine_count == 0 || rack_count == 0 || servers_per_rack == 0 || client_racks == 0)
    throw std::invalid_argument("SystemConfig: counts must be >= 1");
  if (server_rate <= 0.0 || cache_rate_factor <= 0.0)
    throw std::invalid_argument("SystemConfig: rates must be > 0");
  if (universe == 0) throw std::invalid_argument("SystemConfig: empty universe");
  if (utilization <= 0.0) throw std::invalid_argument("SystemConfig: utilization must be > 0");
  if (seeds.hash0 == seeds.hash1)
    throw std::invalid_argument("SystemConfig: hash seeds must differ");
  std::vector<std::string> warnings;
  const double m = static_cast<double>(std::min(spine_count, rack_count));
  const double k = static_cast<double>(effective_hot_objects());
  if (k > std::pow(m, beta_warn))
    warnings.push_back("hot object count exceeds m^beta (k=" + std::to_string(k) +
                       ", m=" + std::to_string(m) + ")");
  return warnings;
}

std::uint64_t SystemConfig::fingerprint() const {
  auto mixd = [](std::uint64_t h, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    __builtin_memcpy(&bits, &v, sizeof(bits));
    return mix64(h, bits);
  };
  std::uint64_t h = 0x915fc0de;
  h = mix64(h, spine_count);
  h = mix64(h, rack_count);
  h = mix64(h, servers_per_rack);
  h = mix64(h, client_racks);
  h = mixd(h, server_rate);
  h = mixd(h, cache_rate_factor);
  h = mix64(h, universe);
  h = mix64(h, hot_objects);
  h = mixd(h, utilization);
  h = mixd(h, epsilon);
  h = mixd(h, beta_warn);
  h = mix64(h, enforce_max_rate_rule ? 1 : 0);
  h = mix64(h, bypass_upper_on_lower_hit ? 1 : 0);
  h = mix64(h, ring_vnodes);
  for (std::uint64_t s : {seeds.hash0, seeds.hash1, seeds.server_select, seeds.workload,
                          seeds.routing, seeds.sim, seeds.sketch, seeds.ring})
    h = mix64(h, s);
  return h;
}

}  // namespace distcache
