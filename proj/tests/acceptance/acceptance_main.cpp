// Acceptance gate: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit status is nonzero if any
// criterion fails. Heavier suites honor DISTCACHE_WORKERS.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "distcache/experiments.hpp"
#include "distcache/selfcheck.hpp"

using namespace distcache;

namespace {

struct Criterion {
  int number;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Criterion> results;

template <typename Fn>
void criterion(int number, const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = fn();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  results.push_back({number, name, pass, detail, seconds});
  std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), seconds, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

std::pair<bool, std::string> from_suite(const SuiteResult& result) {
  bool pass = true;
  std::string detail;
  for (const auto& check : result.checks) {
    if (!check.pass) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += check.name + (check.pass ? " ok" : " FAILED") +
              (check.detail.empty() ? "" : " [" + check.detail + "]");
  }
  return {pass, detail};
}

ExperimentSpec acceptance_spec(const std::string& out_subdir) {
  ExperimentSpec spec;
  spec.out_dir = "acceptance_out/" + out_subdir;
  return spec;
}

}  // namespace

int main() {
  std::printf("acceptance suite: desk-scale checks, seeds pinned\n");

  criterion(1, "matching oracle agrees with exhaustive max-flow on 500 instances", [] {
    const auto r = selfcheck::matching_oracle_equivalence(/*seed=*/1, /*cases=*/500,
                                                          /*max_objects=*/8,
                                                          /*max_nodes=*/4,
                                                          /*max_rate=*/4);
    return std::pair(r.ok(), std::to_string(r.agreed) + "/" + std::to_string(r.cases) +
                                 " agreed, " + std::to_string(r.feasible) +
                                 " feasible, " +
                                 std::to_string(r.invalid_assignments) +
                                 " invalid assignments" +
                                 (r.first_mismatch.empty() ? "" : "; " + r.first_mismatch));
  });

  criterion(2, "expansion checker agrees with 2^U enumeration on 200 graphs", [] {
    const auto r = selfcheck::expansion_oracle_equivalence(/*seed=*/2, /*cases=*/200,
                                                           /*max_objects=*/16,
                                                           /*max_nodes=*/8);
    return std::pair(r.ok(),
                     std::to_string(r.agreed) + "/" + std::to_string(r.cases) + " agreed");
  });

  criterion(3, "feasibility holds in >= 95/100 seeds (m=32, Zipf-0.99, rho=0.8)", [] {
    return from_suite(run_lemma1(acceptance_spec("lemma1")));
  });

  criterion(4, "PoT queue process stationary in >= 95/100 seeds at rho=0.8", [] {
    return from_suite(run_lemma2(acceptance_spec("lemma2")));
  });

  criterion(5, "single-hash baseline overloads a node in >= 30/100 seeds", [] {
    return from_suite(run_lemma3(acceptance_spec("lemma3")));
  });

  criterion(6, "skew sweep: ordering at Zipf-0.99, parity under uniform", [] {
    auto spec = acceptance_spec("fig8a");
    spec.skews = {0.0, 0.99};
    return from_suite(run_fig8a(spec));
  });

  criterion(7, "scale sweep: linear distcache, diminishing nocache", [] {
    auto spec = acceptance_spec("fig8c");
    spec.seeds = {1, 2, 3, 4, 5};
    return from_suite(run_fig8c(spec));
  });

  criterion(8, "write-ratio sweep: replication penalty widens, caching floor", [] {
    auto spec = acceptance_spec("fig9b");
    return from_suite(run_fig9b(spec));
  });

  criterion(9, "failure handling: dip, remap recovery, survivor share", [] {
    auto spec = acceptance_spec("fig10");
    return from_suite(run_fig10(spec));
  });

  criterion(10, "coherence: zero stale reads under drops and duplicates", [] {
    auto spec = acceptance_spec("coherence");
    return from_suite(run_coherence_suite(spec));
  });

  criterion(11, "sketch: no CM underestimates; HH top-10 overlap >= 9/10", [] {
    auto spec = acceptance_spec("sketch");
    return from_suite(run_sketch_suite(spec));
  });

  criterion(12, "determinism: byte-identical CSVs across runs and workers", [] {
    auto spec = acceptance_spec("determinism");
    return from_suite(run_determinism_suite(spec));
  });

  int failed = 0;
  for (const auto& c : results) failed += c.pass ? 0 : 1;
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
