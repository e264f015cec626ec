#include "distcache/workload.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distcache {

double QueryDistribution::max_prob() const {
  double m = 0.0;
  for (double p : probs) m = std::max(m, p);
  return m;
}

double QueryDistribution::prob_sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

QueryDistribution zipf_probs(std::uint64_t universe, double skew) {
  if (universe == 0) throw std::invalid_argument("zipf_probs: universe must be >= 1");
  if (skew < 0.0) throw std::invalid_argument("zipf_probs: skew must be >= 0");
  QueryDistribution d;
  d.universe = universe;
  d.skew = skew;
  d.probs.resize(universe);
  double h = 0.0;
  for (std::uint64_t i = 0; i < universe; ++i) {
    const double w = std::pow(static_cast<double>(i + 1), -skew);
    d.probs[i] = w;
    h += w;
  }
  for (auto& p : d.probs) p /= h;
  return d;
}

QueryDistribution truncate_to_hot(const QueryDistribution& d, std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("truncate_to_hot: k must be >= 1");
  if (k > d.size()) throw std::invalid_argument("truncate_to_hot: k exceeds universe");
  QueryDistribution out;
  out.universe = k;
  out.skew = d.skew;
  out.total_rate = d.total_rate;
  out.probs.assign(d.probs.begin(), d.probs.begin() + k);  // probs are sorted
  double mass = 0.0;
  for (double p : out.probs) mass += p;
  out.retained_mass = d.retained_mass * mass;
  for (auto& p : out.probs) p /= mass;
  return out;
}

QueryDistribution clamp_max_prob(const QueryDistribution& d, double cap) {
  if (cap <= 0.0) throw std::invalid_argument("clamp_max_prob: cap must be > 0");
  if (cap * static_cast<double>(d.size()) < 1.0)
    throw std::invalid_argument("clamp_max_prob: cap too small to hold mass 1");
  QueryDistribution out = d;
  // probs are non-increasing: find the waterfill split point t where capping
  // the head at `cap` lets the scaled tail stay below the cap.
  std::vector<double> suffix(d.size() + 1, 0.0);
  for (std::size_t i = d.size(); i-- > 0;) suffix[i] = suffix[i + 1] + d.probs[i];
  std::size_t t = 0;
  while (t < d.size()) {
    const double tail_mass = suffix[t];
    if (tail_mass <= 0.0) break;
    const double scale = (1.0 - cap * static_cast<double>(t)) / tail_mass;
    if (d.probs[t] * scale <= cap) break;
    ++t;
  }
  const double tail_mass = suffix[t];
  const double scale = tail_mass > 0.0 ? (1.0 - cap * static_cast<double>(t)) / tail_mass : 0.0;
  for (std::size_t i = 0; i < t; ++i) out.probs[i] = cap;
  for (std::size_t i = t; i < d.size(); ++i) out.probs[i] = d.probs[i] * scale;
  return out;
}

// --- rejection-inversion Zipf sampling ---------------------------------------
//
// Exact sampler for p(k) proportional to k^(-s) on {1..N}, after Hormann &
// Derflinger. Works for any s >= 0 including s = 1.

namespace {
double helper1(double x) {
  // log1p(x)/x with a stable series near 0.
  if (std::fabs(x) > 1e-8) return std::log1p(x) / x;
  return 1.0 - x * (0.5 - x * (1.0 / 3.0 - x * 0.25));
}

double helper2(double x) {
  // expm1(x)/x with a stable series near 0.
  if (std::fabs(x) > 1e-8) return std::expm1(x) / x;
  return 1.0 + x * 0.5 * (1.0 + x * (1.0 / 3.0) * (1.0 + x * 0.25));
}
}  // namespace

ZipfSampler::ZipfSampler(std::uint64_t universe, double skew)
    : universe_(universe), skew_(skew) {
  if (universe == 0) throw std::invalid_argument("ZipfSampler: universe must be >= 1");
  if (skew < 0.0) throw std::invalid_argument("ZipfSampler: skew must be >= 0");
  h_integral_x1_ = h_integral(1.5) - 1.0;
  h_integral_n_ = h_integral(static_cast<double>(universe) + 0.5);
  threshold_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double ZipfSampler::h_integral(double x) const {
  const double log_x = std::log(x);
  return helper2((1.0 - skew_) * log_x) * log_x;
}

double ZipfSampler::h(double x) const { return std::exp(-skew_ * std::log(x)); }

double ZipfSampler::h_integral_inverse(double x) const {
  double t = x * (1.0 - skew_);
  if (t < -1.0) t = -1.0;  // guard against rounding below the pole
  return std::exp(helper1(t) * x);
}

std::uint64_t ZipfSampler::sample(Rng& rng) const {
  if (universe_ == 1) return 0;
  for (;;) {
    const double u =
        h_integral_n_ + rng.next_double() * (h_integral_x1_ - h_integral_n_);
    const double x = h_integral_inverse(u);
    std::uint64_t k = static_cast<std::uint64_t>(x + 0.5);
    if (k < 1)
      k = 1;
    else if (k > universe_)
      k = universe_;
    if (static_cast<double>(k) - x <= threshold_ ||
        u >= h_integral(static_cast<double>(k) + 0.5) - h(static_cast<double>(k))) {
      return k - 1;  // 0-based rank
    }
  }
}

InverseCdfSampler::InverseCdfSampler(const QueryDistribution& d) {
  cumulative_.reserve(d.size());
  double acc = 0.0;
  for (double p : d.probs) {
    acc += p;
    cumulative_.push_back(acc);
  }
  if (cumulative_.empty()) throw std::invalid_argument("InverseCdfSampler: empty distribution");
  cumulative_.back() = 1.0;
}

std::uint64_t InverseCdfSampler::sample(Rng& rng) const {
  const double u = rng.next_double();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return static_cast<std::uint64_t>(it - cumulative_.begin());
}

QueryStream::QueryStream(const WorkloadSpec& spec)
    : spec_(spec), sampler_(spec.universe, spec.skew) {
  if (spec.write_ratio < 0.0 || spec.write_ratio > 1.0)
    throw std::invalid_argument("QueryStream: write_ratio must be in [0, 1]");
  if (spec.value_size == 0 || spec.value_size > 128)
    throw std::invalid_argument("QueryStream: value_size must be in [1, 128]");
}

std::uint64_t QueryStream::rank_at(std::uint64_t index) const {
  Rng rng(mix64(spec_.seed, index, 0xdc0ffee1));
  rng.next_double();  // op draw, kept in lockstep with at()
  return sampler_.sample(rng);
}

bool QueryStream::is_write_at(std::uint64_t index) const {
  Rng rng(mix64(spec_.seed, index, 0xdc0ffee1));
  return rng.next_bool(spec_.write_ratio);
}

Query QueryStream::at(std::uint64_t index) const {
  Rng rng(mix64(spec_.seed, index, 0xdc0ffee1));
  Query q;
  q.op = rng.next_bool(spec_.write_ratio) ? QueryOp::kSet : QueryOp::kGet;
  q.rank = sampler_.sample(rng);
  q.key = ObjectId::from_u64(q.rank);
  if (q.op == QueryOp::kSet) {
    q.value.resize(spec_.value_size);
    std::uint64_t w = 0;
    for (std::uint32_t i = 0; i < spec_.value_size; ++i) {
      if (i % 8 == 0) w = rng.next_u64();
      q.value[i] = static_cast<std::uint8_t>(w >> (8 * (i % 8)));
    }
  }
  return q;
}

}  // namespace distcache
