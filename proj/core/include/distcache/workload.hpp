#pragma once

#include <cstdint>
#include <vector>

#include "distcache/object_id.hpp"
#include "distcache/rng.hpp"

namespace distcache {

// Popularity vector P = {p_i}, hottest first, together with the total query
// rate R. probs always sums to 1 (up to rounding); retained_mass records how
// much of the original distribution a truncation kept.
struct QueryDistribution {
  std::vector<double> probs;
  double total_rate = 0.0;   // R, queries/sec
  double skew = 0.0;         // Zipf parameter s
  std::uint64_t universe = 0;
  double retained_mass = 1.0;

  std::uint64_t size() const { return probs.size(); }
  double max_prob() const;
  double prob_sum() const;
  // Rate of object i: r_i = p_i * R.
  double rate_of(std::uint64_t i) const { return probs[i] * total_rate; }
};

// p_i = (i+1)^(-skew) / H with H the generalized harmonic sum over the
// universe. skew = 0 is the uniform distribution.
QueryDistribution zipf_probs(std::uint64_t universe, double skew);

// Keeps the k largest probabilities and renormalizes; records retained mass.
QueryDistribution truncate_to_hot(const QueryDistribution& d, std::uint64_t k);

// Waterfills the distribution so that max p_i <= cap while keeping the sum 1.
// Used to enforce the max-rate rule p_max * R <= T/2. cap * size must be >= 1.
QueryDistribution clamp_max_prob(const QueryDistribution& d, double cap);

// Exact Zipf sampler by rejection-inversion (Hormann & Derflinger); the fast
// path for large universes. Returns 0-based ranks, hottest rank 0.
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t universe, double skew);
  std::uint64_t sample(Rng& rng) const;

 private:
  double h_integral(double x) const;
  double h(double x) const;
  double h_integral_inverse(double x) const;

  std::uint64_t universe_;
  double skew_;
  double h_integral_x1_;
  double h_integral_n_;
  double threshold_;
};

// Reference sampler: inverse CDF over the explicit cumulative table. Slower,
// but independent of the rejection-inversion path; used as its test oracle
// and for small truncated distributions.
class InverseCdfSampler {
 public:
  explicit InverseCdfSampler(const QueryDistribution& d);
  std::uint64_t sample(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

enum class QueryOp : std::uint8_t { kGet, kSet };

struct Query {
  QueryOp op = QueryOp::kGet;
  ObjectId key;
  std::uint64_t rank = 0;          // popularity rank of key
  std::vector<std::uint8_t> value; // SET only, 1..128 bytes
};

struct WorkloadSpec {
  std::uint64_t universe = 1'000'000;
  double skew = 0.99;
  double write_ratio = 0.0;
  std::uint64_t seed = 1;
  std::uint32_t value_size = 8;  // bytes carried by SETs
};

// Seeded query stream. Query i is a pure function of (seed, i), so streams
// are replayable and random-access.
class QueryStream {
 public:
  explicit QueryStream(const WorkloadSpec& spec);

  Query at(std::uint64_t index) const;
  Query next() { return at(cursor_++); }
  std::uint64_t cursor() const { return cursor_; }
  const WorkloadSpec& spec() const { return spec_; }

  // Rank only, skipping op/value derivation; cheap path for the simulator.
  std::uint64_t rank_at(std::uint64_t index) const;
  bool is_write_at(std::uint64_t index) const;

 private:
  WorkloadSpec spec_;
  ZipfSampler sampler_;
  std::uint64_t cursor_ = 0;
};

}  // namespace distcache
