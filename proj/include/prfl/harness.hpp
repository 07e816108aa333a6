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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prfl/config.hpp"
#include "prfl/orchestrator.hpp"

namespace prfl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;

// Metrics CSV: one row per report, fixed columns followed by five columns per
// client (c<i>_density, c<i>_rounds, c<i>_staleness, c<i>_bytes_up,
// c<i>_bytes_down).
std::vector<std::string> MetricsHeader(std::size_t clients);
void WriteMetrics(std::ostream& out, const std::vector<RoundReport>& reports,
                  std::size_t clients);

struct MetricsRow {
  std::int64_t round = 0;
  double sim_time = 0.0;
  double global_acc = 0.0;
};
// Reads back the fixed columns. Throws std::runtime_error on a malformed file.
std::vector<MetricsRow> ReadMetrics(const std::filesystem::path& path);

nlohmann::json Summarize(const RunConfig& cfg,
                         const std::vector<RoundReport>& reports);

std::optional<double> TimeToAccuracy(const std::vector<MetricsRow>& rows,
                                     double threshold);
// Accuracy of the last report at or before `cutoff`; nullopt if none.
std::optional<double> AccuracyAt(const std::vector<MetricsRow>& rows,
                                 double cutoff);
std::vector<MetricsRow> ToRows(const std::vector<RoundReport>& reports);

// Max over min of per-client completed rounds in the final report.
double RoundBalance(const RoundReport& last);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dry_run = false;
  bool trace = false;         // writes trace.txt
  bool dump_packets = false;  // writes packets.bin
};

// Loads, validates and runs one config, writing metrics.csv, summary.json and
// config.json into the output directory. Diagnostics go to `err`, the
// resolved config (dry run) or a one-line result to `out`.
int RunExperiment(const std::string& config_path, const RunOptions& opts,
                  std::ostream& out, std::ostream& err);

struct SweepEntry {
  std::string label;
  std::vector<MetricsRow> rows;
};

struct SweepTable {
  std::vector<double> thresholds;
  double cutoff = 0.0;
  std::vector<std::string> labels;
  std::vector<std::vector<std::optional<double>>> time_to;  // [row][threshold]
  std::vector<std::optional<double>> acc_at_cutoff;

  // Fixed-width text table; "-" marks a threshold never reached.
  std::string Format() const;
};

SweepTable CompareSweep(const std::vector<SweepEntry>& entries,
                        const std::vector<double>& thresholds, double cutoff);

// Loads metrics.csv from each run directory. Throws std::runtime_error naming
// every directory that lacks one.
std::vector<SweepEntry> LoadSweep(const std::vector<std::filesystem::path>& dirs);

// Runs each config (in parallel, up to `jobs` at a time) into
// <out_root>/<variant>-s<seed>. Returns the run directories in input order.
std::vector<std::filesystem::path> RunSweep(const std::vector<RunConfig>& configs,
                                            const std::filesystem::path& out_root,
                                            std::size_t jobs);
void WriteRunOutputs(const RunConfig& cfg, const std::vector<RoundReport>& reports,
                     const std::filesystem::path& dir);

Dataset Concatenate(const std::vector<Dataset>& parts);

// Test accuracy of a dense model trained on the pooled client data for the
// given number of steps, the yardstick for time-to-accuracy comparisons.
double CentralizedAccuracy(const RunConfig& cfg, const ExperimentData& data,
                           std::size_t steps);

}  // namespace prfl
