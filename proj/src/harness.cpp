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

#include "prfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "prfl/distribute.hpp"
#include "prfl/error.hpp"
#include "prfl/rng.hpp"

namespace prfl {

namespace fs = std::filesystem;

namespace {

// Shortest round-trip form, so equal doubles always print identically.
std::string Num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

void WriteFile(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << contents;
}

}  // namespace

std::vector<std::string> MetricsHeader(std::size_t clients) {
  std::vector<std::string> h = {"round", "sim_time", "global_acc",
                                "server_bytes_sent", "server_bytes_received"};
  for (std::size_t i = 0; i < clients; ++i) {
    const std::string p = "c" + std::to_string(i) + "_";
    for (const char* f : {"density", "rounds", "staleness", "bytes_up", "bytes_down"}) {
      h.push_back(p + f);
    }
  }
  return h;
}

void WriteMetrics(std::ostream& out, const std::vector<RoundReport>& reports,
                  std::size_t clients) {
  const auto header = MetricsHeader(clients);
  for (std::size_t k = 0; k < header.size(); ++k) {
    out << (k ? "," : "") << header[k];
  }
  out << '\n';
  for (const auto& r : reports) {
    Require(r.per_client.size() == clients, "WriteMetrics: client count mismatch");
    out << r.round << ',' << Num(r.sim_time) << ',' << Num(r.global_acc) << ','
        << r.server_bytes_sent << ',' << r.server_bytes_received;
    for (const auto& [id, c] : r.per_client) {
      out << ',' << Num(c.density) << ',' << c.rounds_completed << ','
          << c.staleness_age << ',' << c.bytes_up << ',' << c.bytes_down;
    }
    out << '\n';
  }
}

std::vector<MetricsRow> ReadMetrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || SplitCsv(line).size() < 3 ||
      SplitCsv(line)[0] != "round") {
    throw std::runtime_error(path.string() + ": missing metrics header");
  }
  const std::size_t width = SplitCsv(line).size();
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != width) {
      throw std::runtime_error(path.string() + ": ragged row");
    }
    try {
      rows.push_back({std::stoll(cells[0]), std::stod(cells[1]), std::stod(cells[2])});
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": unparsable row '" + line + "'");
    }
  }
  return rows;
}

std::vector<MetricsRow> ToRows(const std::vector<RoundReport>& reports) {
  std::vector<MetricsRow> rows;
  for (const auto& r : reports) rows.push_back({r.round, r.sim_time, r.global_acc});
  return rows;
}

std::optional<double> TimeToAccuracy(const std::vector<MetricsRow>& rows,
                                     double threshold) {
  for (const auto& r : rows) {
    if (r.global_acc >= threshold) return r.sim_time;
  }
  return std::nullopt;
}

std::optional<double> AccuracyAt(const std::vector<MetricsRow>& rows,
                                 double cutoff) {
  std::optional<double> acc;
  for (const auto& r : rows) {
    if (r.sim_time > cutoff) break;
    acc = r.global_acc;
  }
  return acc;
}

double RoundBalance(const RoundReport& last) {
  Require(!last.per_client.empty(), "RoundBalance: no clients");
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [id, c] : last.per_client) {
    lo = std::min(lo, c.rounds_completed);
    hi = std::max(hi, c.rounds_completed);
  }
  Require(lo > 0, "RoundBalance: a client never completed a round");
  return static_cast<double>(hi) / static_cast<double>(lo);
}

nlohmann::json Summarize(const RunConfig& cfg,
                         const std::vector<RoundReport>& reports) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["variant"] = VariantName(cfg.variant);
  j["seed"] = cfg.seed;
  j["data_seed"] = cfg.DataSeed();
  j["reports"] = reports.size();
  if (reports.empty()) return j;
  const auto& last = reports.back();
  double best = 0.0;
  for (const auto& r : reports) best = std::max(best, r.global_acc);
  j["final_round"] = last.round;
  j["final_time"] = last.sim_time;
  j["final_acc"] = last.global_acc;
  j["best_acc"] = best;
  std::vector<std::size_t> rounds;
  std::vector<double> densities;
  bool all_ran = true;
  for (const auto& [id, c] : last.per_client) {
    rounds.push_back(c.rounds_completed);
    densities.push_back(c.density);
    all_ran = all_ran && c.rounds_completed > 0;
  }
  j["rounds_completed"] = rounds;
  j["final_density"] = densities;
  if (all_ran) j["round_balance"] = RoundBalance(last);
  j["server_bytes_sent"] = last.server_bytes_sent;
  j["server_bytes_received"] = last.server_bytes_received;
  return j;
}

void WriteRunOutputs(const RunConfig& cfg, const std::vector<RoundReport>& reports,
                     const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream metrics;
  WriteMetrics(metrics, reports, cfg.clients);
  WriteFile(dir / "metrics.csv", metrics.str());
  WriteFile(dir / "summary.json", Summarize(cfg, reports).dump(2) + "\n");
  WriteFile(dir / "config.json", ConfigToJson(cfg).dump(2) + "\n");
}

int RunExperiment(const std::string& config_path, const RunOptions& opts,
                  std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  ExperimentData data;
  try {
    cfg = LoadConfig(config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out) cfg.output = *opts.out;
    Validate(cfg);
    if (opts.dry_run) {
      out << ConfigToJson(cfg).dump(2) << '\n';
      return kExitOk;
    }
    data = BuildExperimentData(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::ostringstream trace;
  std::string packets;
  RunHooks hooks;
  if (opts.trace) {
    hooks.trace = [&trace](double t, EventKind kind, ClientId c, std::size_t bytes) {
      trace << Num(t) << ' ' << EventKindName(kind) << ' ' << c << ' ' << bytes << '\n';
    };
  }
  if (opts.dump_packets) {
    hooks.packets = [&packets](const std::vector<DeltaPacket>& batch) {
      for (const auto& p : batch) {
        const auto bytes = SerializePacket(p);
        packets.append(bytes.begin(), bytes.end());
      }
    };
  }

  std::vector<RoundReport> reports;
  try {
    reports = Run(cfg, data, hooks);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "run aborted: " << e.what() << '\n';
    return kExitInvariant;
  }

  const fs::path dir(cfg.output);
  WriteRunOutputs(cfg, reports, dir);
  if (opts.trace) WriteFile(dir / "trace.txt", trace.str());
  if (opts.dump_packets) WriteFile(dir / "packets.bin", packets);

  out << VariantName(cfg.variant) << ": " << reports.size() << " reports";
  if (!reports.empty()) {
    out << ", t=" << Num(reports.back().sim_time)
        << ", acc=" << Num(reports.back().global_acc);
  }
  out << ", output " << dir.string() << '\n';
  return kExitOk;
}

std::string SweepTable::Format() const {
  std::ostringstream os;
  std::size_t label_w = 7;
  for (const auto& l : labels) label_w = std::max(label_w, l.size());
  os << std::left << std::setw(static_cast<int>(label_w)) << "variant";
  for (double t : thresholds) {
    os << "  " << std::right << std::setw(12) << ("t@" + Num(t));
  }
  os << "  " << std::setw(12) << ("acc@" + Num(cutoff)) << '\n';
  for (std::size_t r = 0; r < labels.size(); ++r) {
    os << std::left << std::setw(static_cast<int>(label_w)) << labels[r];
    for (const auto& cell : time_to[r]) {
      os << "  " << std::right << std::setw(12) << (cell ? Num(*cell) : "-");
    }
    std::string acc = "-";
    if (acc_at_cutoff[r]) {
      std::ostringstream a;
      a << std::fixed << std::setprecision(4) << *acc_at_cutoff[r];
      acc = a.str();
    }
    os << "  " << std::setw(12) << acc << '\n';
  }
  return os.str();
}

SweepTable CompareSweep(const std::vector<SweepEntry>& entries,
                        const std::vector<double>& thresholds, double cutoff) {
  SweepTable t;
  t.thresholds = thresholds;
  t.cutoff = cutoff;
  for (const auto& e : entries) {
    t.labels.push_back(e.label);
    std::vector<std::optional<double>> row;
    for (double th : thresholds) row.push_back(TimeToAccuracy(e.rows, th));
    t.time_to.push_back(std::move(row));
    t.acc_at_cutoff.push_back(AccuracyAt(e.rows, cutoff));
  }
  return t;
}

std::vector<SweepEntry> LoadSweep(const std::vector<fs::path>& dirs) {
  std::vector<std::string> missing;
  for (const auto& d : dirs) {
    if (!fs::exists(d / "metrics.csv")) missing.push_back(d.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing run outputs:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  std::vector<SweepEntry> out;
  std::optional<std::uint64_t> data_seed;
  for (const auto& d : dirs) {
    SweepEntry e;
    e.label = d.filename().string();
    if (e.label.empty()) e.label = d.parent_path().filename().string();
    if (fs::exists(d / "summary.json")) {
      std::ifstream in(d / "summary.json");
      const auto s = nlohmann::json::parse(in);
      if (s.contains("data_seed")) {
        const auto ds = s.at("data_seed").get<std::uint64_t>();
        if (data_seed && *data_seed != ds) {
          throw std::runtime_error("runs do not share a dataset seed: " + d.string());
        }
        data_seed = ds;
      }
    }
    e.rows = ReadMetrics(d / "metrics.csv");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<fs::path> RunSweep(const std::vector<RunConfig>& configs,
                               const fs::path& out_root, std::size_t jobs) {
  std::vector<fs::path> dirs;
  for (const auto& c : configs) {
    dirs.push_back(out_root / (std::string(VariantName(c.variant)) + "-s" +
                               std::to_string(c.seed)));
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < configs.size(); k = next++) {
      WriteRunOutputs(configs[k], Run(configs[k]), dirs[k]);
    }
  };
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, jobs); ++w) {
    pool.push_back(std::async(std::launch::async, worker));
  }
  for (auto& f : pool) f.get();
  return dirs;
}

Dataset Concatenate(const std::vector<Dataset>& parts) {
  Require(!parts.empty(), "Concatenate: nothing to join");
  Dataset out;
  out.dims = parts.front().dims;
  out.num_classes = parts.front().num_classes;
  for (const auto& p : parts) {
    Require(p.dims == out.dims && p.num_classes == out.num_classes,
            "Concatenate: incompatible datasets");
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

double CentralizedAccuracy(const RunConfig& cfg, const ExperimentData& data,
                           std::size_t steps) {
  const Dataset pooled = Concatenate(data.client_data);
  const auto shapes = cfg.ModelShapes();
  ParamVector w = InitModel(shapes, DeriveSeed(cfg.seed, 0x63656e74));
  const Mask dense(w.size(), true);
  TrainSpec spec = cfg.train;
  spec.local_iterations = std::max<std::size_t>(1, cfg.train.local_iterations);
  const std::size_t chunks = (steps + spec.local_iterations - 1) / spec.local_iterations;
  for (std::size_t r = 0; r < chunks; ++r) {
    w = LocalTrain(w, dense, pooled, spec, static_cast<std::int64_t>(r),
                   DeriveSeed(cfg.seed, 0x63656e74, r));
  }
  return TestAccuracy(w, data.test);
}

}  // namespace prfl
