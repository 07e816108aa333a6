// Copyright 2026 The prfl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "prfl/config.hpp"
#include "prfl/error.hpp"
#include "prfl/harness.hpp"

namespace {

int Validate(const std::string& path) {
  try {
    prfl::LoadConfig(path);
  } catch (const prfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return prfl::kExitConfig;
  }
  std::cout << path << ": ok\n";
  return prfl::kExitOk;
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> runs;
  std::string out = "runs/sweep";
  std::size_t jobs = 0;
  std::vector<double> thresholds = {0.6, 0.7, 0.8};
  double cutoff = 0.0;
};

int Sweep(const SweepArgs& a) {
  std::vector<std::filesystem::path> dirs;
  try {
    if (!a.runs.empty()) {
      dirs.assign(a.runs.begin(), a.runs.end());
    } else {
      if (a.config.empty()) {
        std::cerr << "sweep needs --config or --runs\n";
        return prfl::kExitConfig;
      }
      const prfl::RunConfig base = prfl::LoadConfig(a.config);
      std::vector<prfl::RunConfig> configs;
      std::vector<std::string> variants = a.variants;
      if (variants.empty()) variants = {prfl::VariantName(base.variant)};
      std::vector<std::uint64_t> seeds = a.seeds;
      if (seeds.empty()) seeds = {base.seed};
      for (const auto& v : variants) {
        for (auto s : seeds) {
          prfl::RunConfig c = base;
          c.variant = prfl::ParseVariant(v);
          c.toggles.reset();
          c.seed = s;
          // Every run of a sweep shares the base dataset.
          c.data.seed = base.DataSeed();
          prfl::Validate(c);
          configs.push_back(c);
        }
      }
      const std::size_t jobs =
          a.jobs ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
      dirs = prfl::RunSweep(configs, a.out, jobs);
    }
  } catch (const prfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return prfl::kExitConfig;
  }
  try {
    const auto entries = prfl::LoadSweep(dirs);
    double cutoff = a.cutoff;
    if (cutoff <= 0.0) {
      for (const auto& e : entries) {
        if (!e.rows.empty()) cutoff = std::max(cutoff, e.rows.back().sim_time);
      }
    }
    const auto table = prfl::CompareSweep(entries, a.thresholds, cutoff);
    std::cout << table.Format();
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return prfl::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prfl: simulated asynchronous federated learning with pruning"};
  app.require_subcommand(1);

  std::string config;
  prfl::RunOptions opts;
  std::uint64_t seed = 0;
  std::string out;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config, "JSON config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");
  auto* out_opt = run->add_option("--out", out, "Override the output directory");
  run->add_flag("--dry-run", opts.dry_run, "Validate and print the resolved config");
  run->add_flag("--trace", opts.trace, "Write an event trace");
  run->add_flag("--dump-packets", opts.dump_packets, "Write serialized delta packets");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("--config", validate_config, "JSON config file")->required();

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Run or compare several experiments");
  sweep->add_option("--config", sweep_args.config, "Base JSON config");
  sweep->add_option("--variants", sweep_args.variants, "Variants to run")->delimiter(',');
  sweep->add_option("--seeds", sweep_args.seeds, "Master seeds")->delimiter(',');
  sweep->add_option("--runs", sweep_args.runs, "Compare existing run directories");
  sweep->add_option("--out", sweep_args.out, "Output root");
  sweep->add_option("--jobs", sweep_args.jobs, "Parallel runs (default: cores)");
  sweep->add_option("--thresholds", sweep_args.thresholds, "Accuracy thresholds")
      ->delimiter(',');
  sweep->add_option("--cutoff", sweep_args.cutoff,
                    "Time for the accuracy column (default: longest run)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : prfl::kExitConfig;
  }

  if (*run) {
    if (*seed_opt) opts.seed = seed;
    if (*out_opt) opts.out = out;
    return prfl::RunExperiment(config, opts, std::cout, std::cerr);
  }
  if (*validate) return Validate(validate_config);
  return Sweep(sweep_args);
}
