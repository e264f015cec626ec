#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "distcache/allocation.hpp"
#include "distcache/experiments.hpp"
#include "distcache/matching.hpp"
#include "distcache/selfcheck.hpp"

namespace {

using namespace distcache;

int print_suite_result(const SuiteResult& result) {
  for (const auto& check : result.checks) {
    std::printf("[%s] %s: %s%s%s\n", check.pass ? "PASS" : "FAIL",
                result.suite.c_str(), check.name.c_str(),
                check.detail.empty() ? "" : " -- ", check.detail.c_str());
  }
  for (const auto& file : result.files) std::printf("  wrote %s\n", file.c_str());
  return result.passed() ? 0 : 1;
}

int cmd_run(const std::string& suite, const std::string& config_path,
            const std::string& seed_range, const std::string& out_dir,
            bool deterministic, std::uint32_t workers) {
  ExperimentSpec spec;
  if (!config_path.empty()) spec = parse_spec_file(config_path);
  if (!seed_range.empty()) {
    std::ostringstream text;
    text << "[experiment]\nseeds = " << seed_range << "\n";
    const auto patch = parse_spec_text(text.str(), "<--seeds>");
    spec.seeds = patch.seeds;
  }
  if (!out_dir.empty()) spec.out_dir = out_dir;
  if (deterministic) spec.deterministic = true;
  if (workers > 0) spec.workers = workers;

  int exit_code = 0;
  const auto names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
  for (const auto& name : names) {
    const auto result = run_suite(name, spec);
    if (print_suite_result(result) != 0) exit_code = 1;
  }
  return exit_code;
}

int cmd_verify(const std::string& instance_path, bool as_json) {
  const auto inst = read_instance_file(instance_path);
  const auto asg = solve_matching(inst);

  IntensityReport intensity;
  if (inst.node_count() <= kMaxExhaustiveIntensityNodes)
    intensity = traffic_intensity(inst);
  else
    intensity = traffic_intensity_sampled(inst, 256, 1);
  const auto expansion = check_expansion(inst.graph);

  if (as_json) {
    nlohmann::json j;
    j["feasible"] = asg.feasible;
    j["demand"] = asg.demand;
    j["max_flow"] = asg.max_flow;
    j["rho_max"] = intensity.rho_max;
    j["expansion"] = expansion.holds;
    if (asg.feasible) {
      auto& weights = j["assignment"] = nlohmann::json::array();
      for (std::uint32_t i = 0; i < inst.object_count(); ++i)
        weights.push_back({{"object", i},
                           {"upper", asg.upper_weight[i]},
                           {"lower", asg.lower_weight[i]}});
    } else if (asg.witness) {
      j["violated_cut"] = {{"objects", asg.witness->objects},
                           {"demand", asg.witness->demand},
                           {"neighborhood_capacity", asg.witness->capacity}};
    }
    std::cout << j.dump(2) << '\n';
    return asg.feasible ? 0 : 2;
  }

  std::printf("objects: %u  nodes: %u+%u\n", inst.object_count(),
              inst.graph.upper_count(), inst.graph.lower_count());
  std::printf("feasible: %s (max flow %.6f of demand %.6f)\n",
              asg.feasible ? "yes" : "no", asg.max_flow, asg.demand);
  std::printf("rho_max: %.6f%s\n", intensity.rho_max,
              inst.node_count() <= kMaxExhaustiveIntensityNodes ? " (exhaustive)"
                                                                : " (sampled)");
  std::printf("expansion property: %s\n", expansion.holds ? "holds" : "violated");
  if (!expansion.holds) {
    std::printf("  deficient object set:");
    for (auto i : expansion.witness) std::printf(" %u", i);
    std::printf("\n");
  }
  if (asg.feasible) {
    for (std::uint32_t i = 0; i < inst.object_count(); ++i)
      std::printf("  object %u: upper %.6f lower %.6f\n", i, asg.upper_weight[i],
                  asg.lower_weight[i]);
  } else if (asg.witness) {
    std::printf("violated cut: %zu objects, demand %.6f > neighborhood capacity %.6f\n",
                asg.witness->objects.size(), asg.witness->demand, asg.witness->capacity);
  }
  return asg.feasible ? 0 : 2;
}

int cmd_partition_dump(std::uint64_t seed, std::uint32_t spines, std::uint32_t racks) {
  const Seeds seeds = Seeds::derive(seed);
  Partitioner partitioner(seeds.hash0, seeds.hash1, spines, racks);
  PartitionMap pmap(&partitioner, seeds.ring);
  pmap.dump(std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distcache: distributed caching simulator and feasibility oracle"};
  app.require_subcommand(1);

  std::string suite = "all";
  std::string config_path;
  std::string seed_range;
  std::string out_dir;
  bool deterministic = false;
  std::uint32_t workers = 0;
  auto* run = app.add_subcommand("run", "run an experiment suite");
  run->add_option("--suite", suite, "suite name or 'all'");
  run->add_option("--config", config_path, "experiment spec file");
  run->add_option("--seeds", seed_range, "seed list or range, e.g. 1..10");
  run->add_option("--out", out_dir, "output directory for CSVs");
  run->add_option("--workers", workers, "worker thread count");
  run->add_flag("--deterministic", deterministic, "force a single worker");

  std::string instance_path;
  bool verify_json = false;
  auto* verify = app.add_subcommand("verify", "check a matching instance file");
  verify->add_option("instance", instance_path, "instance file")->required();
  verify->add_flag("--json", verify_json, "machine-readable output");

  std::uint64_t dump_seed = 1;
  std::uint32_t dump_spines = 8;
  std::uint32_t dump_racks = 8;
  auto* dump = app.add_subcommand("partition-dump", "print the partition map");
  dump->add_option("--seed", dump_seed, "master seed");
  dump->add_option("--spines", dump_spines, "upper-layer node count");
  dump->add_option("--racks", dump_racks, "lower-layer node count");

  auto* selftest = app.add_subcommand("selftest", "run the oracle-equivalence suites");
  std::string selftest_out = "out";
  selftest->add_option("--out", selftest_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(suite, config_path, seed_range, out_dir, deterministic, workers);
    if (verify->parsed()) return cmd_verify(instance_path, verify_json);
    if (dump->parsed()) return cmd_partition_dump(dump_seed, dump_spines, dump_racks);
    if (selftest->parsed()) {
      ExperimentSpec spec;
      spec.out_dir = selftest_out;
      return print_suite_result(run_selftest(spec));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
