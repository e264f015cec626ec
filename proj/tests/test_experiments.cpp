#include <doctest.h>

#include "distcache/experiments.hpp"

using namespace distcache;

TEST_SUITE_BEGIN("experiments");

TEST_CASE("spec text: sections, lists, ranges") {
  const std::string text = R"(# comment
[experiment]
name = smoke
seeds = 4..7
horizon = 2.5
out = results
[topology]
spines = 4
racks = 4
servers_per_rack = 2
server_rate = 150
[workload]
skews = 0, 0.99
write_ratios = 0, 0.5
[policies]
list = distcache, nocache
[sweeps]
rack_counts = 2, 4
)";
  const auto spec = parse_spec_text(text, "<test>");
  CHECK(spec.name == "smoke");
  CHECK(spec.seeds == std::vector<std::uint64_t>{4, 5, 6, 7});
  CHECK(spec.horizon_s == doctest::Approx(2.5));
  CHECK(spec.out_dir == "results");
  CHECK(spec.base.spine_count == 4);
  CHECK(spec.base.server_rate == doctest::Approx(150.0));
  CHECK(spec.skews == std::vector<double>{0.0, 0.99});
  CHECK(spec.policies ==
        std::vector<PolicyKind>{PolicyKind::kPot, PolicyKind::kNoCache});
  CHECK(spec.rack_counts == std::vector<std::uint32_t>{2, 4});
}

TEST_CASE("spec text: errors carry the offending line") {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      parse_spec_text(text, "<test>");
      FAIL("expected parse error for: ", text);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("[experiment]\nbogus_key = 1\n", "<test>:2");
  expect_error("[policies]\nlist = ,\n", "empty policy list");
  expect_error("no_equals_here\n", "key = value");
  expect_error("[broken\n", "unterminated");
}

TEST_CASE("unknown policies and suites are rejected") {
  CHECK_THROWS_AS(policy_from_name("zzz"), std::invalid_argument);
  ExperimentSpec spec;
  CHECK_THROWS_AS(run_suite("nope", spec), std::invalid_argument);
}

TEST_CASE("config fingerprint is stable and sensitive") {
  SystemConfig a;
  SystemConfig b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.rack_count = 16;
  CHECK(a.fingerprint() != b.fingerprint());
  SystemConfig c;
  c.seeds = Seeds::derive(99);
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("config validation: beta warning fires without refusing") {
  SystemConfig cfg;
  cfg.spine_count = 4;
  cfg.rack_count = 4;
  cfg.hot_objects = 100;  // 100 > 4^3
  const auto warnings = cfg.validate();
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings[0].find("m^beta") != std::string::npos);
}

TEST_CASE("lemma instances: construction invariants") {
  const auto inst = lemma1_instance(3, 32, 0.99, 0.8, 1.0);
  CHECK(inst.object_count() == 111);  // ceil(32 ln 32)
  CHECK(inst.node_count() == 64);
  const double rate = 0.8 * 32.0;
  double total = 0.0;
  double max_rate = 0.0;
  for (double r : inst.rates) {
    total += r;
    max_rate = std::max(max_rate, r);
  }
  CHECK(total == doctest::Approx(rate).epsilon(1e-9));
  CHECK(max_rate <= 0.5 + 1e-9);  // p_max * R <= capacity / 2

  const auto single = lemma3_instance(5, 32, 32, 4.0);
  CHECK(single.graph.single_hash());
  CHECK(single.object_count() == 32);
  CHECK(single.node_count() == 32);
}

TEST_SUITE_END();
