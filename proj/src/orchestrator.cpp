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

#include "prfl/orchestrator.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <optional>

#include "prfl/aggregate.hpp"
#include "prfl/data.hpp"
#include "prfl/density.hpp"
#include "prfl/error.hpp"
#include "prfl/rng.hpp"

namespace prfl {

ExperimentData BuildExperimentData(const RunConfig& cfg) {
  Validate(cfg);
  const auto& d = cfg.data;
  const std::size_t total = d.test_samples + cfg.clients * d.samples_per_client;
  const std::uint64_t seed = cfg.DataSeed();
  Dataset all = GenerateDataset(d.classes, d.dims, total, seed, d.clusters);

  std::vector<std::size_t> test_idx(d.test_samples);
  std::iota(test_idx.begin(), test_idx.end(), std::size_t{0});
  std::vector<std::size_t> train_idx(total - d.test_samples);
  std::iota(train_idx.begin(), train_idx.end(), d.test_samples);

  ExperimentData out;
  out.test = all.Subset(test_idx);
  const Dataset train = all.Subset(train_idx);
  const PartitionSpec spec{d.partition, d.skew_alpha, DeriveSeed(seed, 1)};
  out.client_data = Partition(train, cfg.clients, spec);
  return out;
}

namespace {

// Stream tags for DeriveSeed.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kNetStream = 0x6e6574;
constexpr std::uint64_t kTrainStream = 0x747261696e;

}  // namespace

std::uint64_t ModelInitSeed(std::uint64_t master) {
  return DeriveSeed(master, kInitStream);
}

std::uint64_t TrainingSeed(std::uint64_t master, ClientId client, std::uint64_t cycle) {
  return DeriveSeed(master, kTrainStream, client, cycle);
}

namespace {

enum class Mode {
  kBarrier,     // wait for every client, then aggregate
  kTick,        // aggregate on the tick schedule
  kPerArrival,  // aggregate each model as it lands
};

Mode ModeFor(const VariantToggles& t) {
  if (t.synchronous) return Mode::kBarrier;
  if (t.thresholded) return Mode::kTick;
  return Mode::kPerArrival;
}

enum class Phase { kIdle, kDownloading, kTraining, kUploading };

using PacketBatch = std::shared_ptr<const std::vector<DeltaPacket>>;

struct ClientState {
  Phase phase = Phase::kIdle;
  std::int64_t dispatch_round = 0;
  double cycle_start = 0.0;
  std::uint64_t cycles = 0;
  std::size_t rounds_completed = 0;
  Mask mask;            // currently assigned
  Mask dispatch_mask;   // assigned when the in-flight cycle started
  ParamVector base;     // model the in-flight cycle trains from
  ParamVector trained;
  PacketBatch packets;  // null for dense dispatch
  IndexRange range;
  DensityState density;
  EarlyStopper stopper;
  bool fresh = false;  // arrived since the last aggregation
  std::optional<double> first_round_time;
};

class Simulation {
 public:
  Simulation(const RunConfig& cfg, const ExperimentData& data,
             const RunHooks& hooks)
      : cfg_(cfg),
        data_(data),
        hooks_(hooks),
        toggles_(cfg.EffectiveToggles()),
        mode_(ModeFor(toggles_)),
        shapes_(cfg.ModelShapes()),
        net_(cfg.ServerEndpoint(), cfg.ClientEndpoints(),
             DeriveSeed(cfg.seed, kNetStream)) {
    Require(data.client_data.size() == cfg.clients,
            "Run: one dataset per client expected");
    global_ = InitModel(shapes_, ModelInitSeed(cfg.seed));
    len_ = global_.size();
    clients_.resize(cfg.clients);
    for (ClientId i = 0; i < cfg.clients; ++i) {
      auto& c = clients_[i];
      c.mask = Mask(len_, true);
      c.density.rho = 1.0;
      c.density.rho_min = cfg.density.rho_min[i];
      c.density.delta_rho = cfg.density.delta_rho;
      c.density.queue = TimeQueue(cfg.density.queue_capacity);
      c.stopper.patience = cfg.density.patience;
      c.stopper.min_delta = cfg.density.min_delta;
    }
    global_stopper_.patience = cfg.density.patience;
    global_stopper_.min_delta = cfg.density.min_delta;
  }

  std::vector<RoundReport> Run() {
    std::vector<ClientId> everyone(cfg_.clients);
    std::iota(everyone.begin(), everyone.end(), ClientId{0});
    Dispatch(everyone);
    while (!stop_) {
      auto ev = q_.Advance();
      if (!ev || ev->time > cfg_.schedule.t_max) break;
      Handle(*ev);
    }
    return std::move(reports_);
  }

 private:
  std::size_t M() const { return cfg_.clients; }

  // Round index used for schedules and evaluation cadence. Per-arrival modes
  // count one round per M arrivals.
  std::int64_t EffectiveRound(std::int64_t n) const {
    return mode_ == Mode::kPerArrival ? n / static_cast<std::int64_t>(M()) : n;
  }

  double PayloadMb(std::size_t entries) const {
    return cfg_.network.model_size_mb * static_cast<double>(SparseBytes(entries)) /
           static_cast<double>(SparseBytes(len_));
  }

  void Trace(double t, EventKind kind, ClientId c, std::size_t bytes) const {
    if (hooks_.trace) hooks_.trace(t, kind, c, bytes);
  }

  void Dispatch(const std::vector<ClientId>& ids) {
    if (ids.empty()) return;
    if (!toggles_.pruning) {
      for (ClientId i : ids) {
        auto& c = clients_[i];
        c.base = global_;
        c.packets = nullptr;
        server_sent_ += SparseBytes(len_);
        StartDownload(i, SparseBytes(len_));
      }
      return;
    }
    std::map<ClientId, Mask> masks;
    for (ClientId i : ids) masks.emplace(i, clients_[i].mask);
    auto [set, order] = BuildSubmodels(global_, masks);
    auto batch = std::make_shared<const std::vector<DeltaPacket>>(
        EncodeDeltas(set, static_cast<std::uint32_t>(round_)));
    if (hooks_.packets) hooks_.packets(*batch);
    server_sent_ += toggles_.differential ? DifferentialBytes(*batch)
                                          : NaiveBytes(set);
    for (ClientId i : ids) {
      auto& c = clients_[i];
      c.packets = batch;
      c.range = IndexFor(order, i);
      std::size_t bytes = 0;
      if (toggles_.differential) {
        for (std::size_t k = 0; k < c.range.hi; ++k) bytes += (*batch)[k].byte_size();
      } else {
        bytes = SparseBytes(c.mask.Count());
      }
      StartDownload(i, bytes);
    }
  }

  void StartDownload(ClientId i, std::size_t bytes) {
    auto& c = clients_[i];
    Require(c.phase == Phase::kIdle, "dispatch to a busy client");
    c.phase = Phase::kDownloading;
    c.dispatch_round = round_;
    c.cycle_start = q_.now();
    c.dispatch_mask = c.mask;
    net_.Start(q_, i, Direction::kDownlink, PayloadMb(c.mask.Count()), bytes);
  }

  void Handle(const SimEvent& ev) {
    switch (ev.kind) {
      case EventKind::kTransferComplete: {
        auto t = net_.Complete(q_, ev);
        if (!t) return;
        Trace(ev.time, ev.kind, ev.client, t->payload_bytes);
        if (t->direction == Direction::kDownlink) {
          OnDownloaded(ev.client);
        } else {
          OnUploaded(ev.client);
        }
        return;
      }
      case EventKind::kTrainingComplete:
        Trace(ev.time, ev.kind, ev.client, 0);
        OnTrained(ev.client);
        return;
      case EventKind::kAggregationTick:
        Trace(ev.time, ev.kind, ev.client, 0);
        OnTick();
        return;
    }
  }

  void OnDownloaded(ClientId i) {
    auto& c = clients_[i];
    Require(c.phase == Phase::kDownloading, "download finished for a client not downloading");
    if (c.packets) {
      c.base = Reconstruct(*c.packets, c.range, shapes_);
      Require(ReconstructMask(*c.packets, c.range, len_) == c.dispatch_mask,
              "reconstructed mask differs from the assigned mask");
      c.packets = nullptr;
    }
    const std::uint64_t seed = TrainingSeed(cfg_.seed, i, c.cycles++);
    c.trained = LocalTrain(c.base, c.dispatch_mask, data_.client_data[i], cfg_.train,
                           EffectiveRound(c.dispatch_round), seed);
    Require(MaskOf(c.trained).IsSubsetOf(c.dispatch_mask),
            "trained model leaves its mask");
    const double compute = static_cast<double>(cfg_.train.local_iterations) *
                           cfg_.compute.seconds_per_iteration *
                           c.dispatch_mask.Density() * cfg_.compute.factors[i];
    c.phase = Phase::kTraining;
    q_.Push({q_.now() + compute, EventKind::kTrainingComplete, i, c.cycles, 0});
  }

  void OnTrained(ClientId i) {
    auto& c = clients_[i];
    Require(c.phase == Phase::kTraining, "training finished for a client not training");
    c.phase = Phase::kUploading;
    const std::size_t entries = c.dispatch_mask.Count();
    net_.Start(q_, i, Direction::kUplink, PayloadMb(entries), SparseBytes(entries));
  }

  void OnUploaded(ClientId i) {
    auto& c = clients_[i];
    Require(c.phase == Phase::kUploading, "upload finished for a client not uploading");
    c.phase = Phase::kIdle;
    ++c.rounds_completed;
    const double now = q_.now();

    ClientRecord rec;
    rec.model = c.trained;
    rec.dispatch_round = c.dispatch_round;
    rec.arrival_time = now;
    rec.round_time = now - c.cycle_start;
    rec.queue = c.density.queue;
    rec.density = c.dispatch_mask.Density();
    buffer_.round = round_;
    buffer_ = UpdateBuffer(std::move(buffer_), i, std::move(rec));
    c.density.queue = buffer_.records.at(i).queue;
    c.fresh = true;
    if (!c.first_round_time) c.first_round_time = now - c.cycle_start;

    switch (mode_) {
      case Mode::kBarrier:
        if (std::all_of(clients_.begin(), clients_.end(),
                        [](const ClientState& s) { return s.phase == Phase::kIdle; })) {
          q_.Push({now + cfg_.schedule.t_merge, EventKind::kAggregationTick, 0, 0, 0});
        }
        return;
      case Mode::kTick:
        if (!ticks_ && std::all_of(clients_.begin(), clients_.end(),
                                   [](const ClientState& s) {
                                     return s.rounds_completed > 0;
                                   })) {
          ticks_.emplace(now, TickInterval(), cfg_.schedule.t_merge);
          PushTick();
        }
        return;
      case Mode::kPerArrival:
        MixArrival(i);
        ++round_;
        buffer_.round = round_;
        if (round_ % static_cast<std::int64_t>(M()) == 0) {
          EvaluationBlock(EffectiveRound(round_));
        }
        Report();
        if (!stop_) Dispatch({i});
        return;
    }
  }

  double TickInterval() const {
    if (cfg_.schedule.delta_t > 0.0) return cfg_.schedule.delta_t;
    std::vector<double> times;
    for (const auto& c : clients_) times.push_back(*c.first_round_time);
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 == 1 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  }

  void PushTick() {
    q_.Push({ticks_->Next(), EventKind::kAggregationTick, 0, 0, 0});
  }

  void OnTick() {
    ++round_;
    buffer_.round = round_;
    const bool any_fresh = std::any_of(clients_.begin(), clients_.end(),
                                       [](const ClientState& c) { return c.fresh; });
    if (any_fresh) Aggregate();
    for (auto& c : clients_) c.fresh = false;
    EvaluationBlock(round_);
    Report();
    if (stop_) return;
    std::vector<ClientId> idle;
    for (ClientId i = 0; i < M(); ++i) {
      if (clients_[i].phase == Phase::kIdle) idle.push_back(i);
    }
    Dispatch(idle);
    if (mode_ == Mode::kTick) PushTick();
  }

  void Aggregate() {
    const auto& agg = cfg_.aggregation;
    if (!toggles_.buffered) {
      // Windowed update: apply each new arrival's delta against the model it
      // started from, weighted 1/M.
      ParamVector next = global_;
      const double w = agg.eta_g / static_cast<double>(M());
      for (ClientId i = 0; i < M(); ++i) {
        const auto& c = clients_[i];
        if (!c.fresh) continue;
        const auto& model = buffer_.records.at(i).model;
        for (std::size_t k = 0; k < len_; ++k) next[k] += w * (model[k] - c.base[k]);
      }
      global_ = std::move(next);
      return;
    }
    const StalenessWeights wts = ComputeStalenessWeights(buffer_, agg.beta);
    global_ = toggles_.masked_aggregation ? MaskFedAvg(buffer_, global_, wts, agg.eta_g)
                                          : FedAvg(buffer_, wts);
  }

  // Immediate staleness-damped mixing of one arrival, restricted to the
  // coordinates the client was allowed to train.
  void MixArrival(ClientId i) {
    const auto& c = clients_[i];
    const auto& model = buffer_.records.at(i).model;
    const double s = FreshnessScore(round_, c.dispatch_round, cfg_.aggregation.beta);
    const double a = cfg_.aggregation.alpha * s;
    for (std::size_t k = 0; k < len_; ++k) {
      if (c.dispatch_mask[k]) global_[k] = (1.0 - a) * global_[k] + a * model[k];
    }
  }

  void EvaluationBlock(std::int64_t n) {
    const auto interval = static_cast<std::int64_t>(cfg_.density.pruning_interval);
    if (!(n == 1 || (n + 1) % interval == 0)) return;

    if (toggles_.pruning) {
      for (auto& [id, rec] : buffer_.records) {
        auto& c = clients_[id];
        const double acc = TestAccuracy(rec.model, data_.test);
        auto [stopper, fired] = ObserveAccuracy(c.stopper, acc);
        c.stopper = stopper;
        if (fired && toggles_.recovery && c.density.rho < 1.0) {
          c.density = RecoverDensity(c.density);
        }
      }
    }

    if (!buffer_.records.empty()) {
      ParamVector candidate =
          toggles_.pruning
              ? FedAvg(buffer_, ComputeStalenessWeights(buffer_, cfg_.aggregation.beta))
              : global_;
      auto [stopper, fired] = ObserveAccuracy(global_stopper_,
                                              TestAccuracy(candidate, data_.test));
      global_stopper_ = stopper;
      if (fired && cfg_.schedule.stop_on_plateau) {
        std::map<ClientId, double> densities;
        for (ClientId i = 0; i < M(); ++i) densities[i] = clients_[i].density.rho;
        if (ShouldTerminate(densities, true)) stop_ = true;
      }
    }

    if (!toggles_.pruning) return;
    std::map<ClientId, double> means;
    for (ClientId i = 0; i < M(); ++i) {
      if (auto m = MeanRoundTime(clients_[i].density.queue)) means[i] = *m;
    }
    for (ClientId i = 0; i < M(); ++i) {
      auto& c = clients_[i];
      // No timing history yet: keep the provisional full density.
      c.density.rho = means.count(i) ? ComputeDensity(means, i, c.density) : 1.0;
      c.mask = PruneToDensity(global_, c.density.rho, cfg_.density.policy);
    }
  }

  void Report() {
    RoundReport r;
    r.round = round_;
    r.sim_time = q_.now();
    r.global_acc = TestAccuracy(global_, data_.test);
    for (ClientId i = 0; i < M(); ++i) {
      const auto& c = clients_[i];
      ClientReport cr;
      cr.density = c.density.rho;
      cr.rounds_completed = c.rounds_completed;
      if (auto it = buffer_.records.find(i); it != buffer_.records.end()) {
        cr.staleness_age = round_ - it->second.dispatch_round;
      }
      cr.bytes_up = net_.client_bytes_sent(i);
      cr.bytes_down = net_.client_bytes_received(i);
      r.per_client.emplace(i, cr);
    }
    r.server_bytes_sent = server_sent_;
    r.server_bytes_received = net_.server_bytes_received();
    reports_.push_back(std::move(r));
    if (hooks_.report) hooks_.report(reports_.back());
    const auto budget = static_cast<std::int64_t>(cfg_.schedule.max_rounds);
    if (EffectiveRound(round_) >= budget) stop_ = true;
  }

  const RunConfig& cfg_;
  const ExperimentData& data_;
  const RunHooks& hooks_;
  VariantToggles toggles_;
  Mode mode_;
  std::vector<LayerShape> shapes_;
  std::size_t len_ = 0;

  EventQueue q_;
  Network net_;
  std::optional<TickSchedule> ticks_;
  std::vector<ClientState> clients_;
  ParamVector global_;
  ServerBuffer buffer_;
  EarlyStopper global_stopper_;
  std::int64_t round_ = 0;
  std::size_t server_sent_ = 0;
  bool stop_ = false;
  std::vector<RoundReport> reports_;
};

}  // namespace

std::vector<RoundReport> Run(const RunConfig& cfg, const ExperimentData& data,
                             const RunHooks& hooks) {
  Validate(cfg);
  return Simulation(cfg, data, hooks).Run();
}

std::vector<RoundReport> Run(const RunConfig& cfg) {
  const ExperimentData data = BuildExperimentData(cfg);
  return Run(cfg, data);
}

}  // namespace prfl
