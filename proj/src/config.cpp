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

#include "prfl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "prfl/error.hpp"
#include "prfl/rng.hpp"

namespace prfl {

using nlohmann::json;

namespace {

// Reads keys out of one JSON object, remembering which ones were consumed so
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(Where(key) + ": " + e.what());
    }
  }

  // A number (repeated for every client) or an array of length `n`.
  // Absent keys cycle `fallback` to length n.
  void GetPerClient(const std::string& key, std::size_t n,
                    const std::vector<double>& fallback,
                    std::vector<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      out.resize(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = fallback[i % fallback.size()];
      return;
    }
    const json& v = j_.at(key);
    if (v.is_number()) {
      out.assign(n, v.get<double>());
    } else if (v.is_array()) {
      try {
        out = v.get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw ConfigError(Where(key) + ": " + e.what());
      }
    } else {
      throw ConfigError(Where(key) + ": expected a number or an array");
    }
  }

  const json& Child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return j_.contains(key) ? j_.at(key) : kEmpty;
  }

  std::string Where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void RejectUnknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + Where(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* PolicyName(PruningPolicy p) {
  return p == PruningPolicy::kGlobalMagnitude ? "global" : "layerwise";
}

PruningPolicy ParsePolicy(const std::string& name) {
  if (name == "global") return PruningPolicy::kGlobalMagnitude;
  if (name == "layerwise") return PruningPolicy::kLayerwiseMagnitude;
  throw ConfigError("unknown pruning policy '" + name + "'");
}

void RequirePositive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
}

void RequireNonNegative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(what + " must be non-negative");
  }
}

void RequireLength(const std::vector<double>& v, std::size_t n,
                   const std::string& what) {
  if (v.size() != n) {
    throw ConfigError(what + " has " + std::to_string(v.size()) +
                      " entries, expected one per client (" + std::to_string(n) +
                      ")");
  }
}

}  // namespace

VariantToggles RunConfig::EffectiveToggles() const {
  return toggles.value_or(TogglesFor(variant));
}

std::uint64_t RunConfig::DataSeed() const {
  return data.seed.value_or(DeriveSeed(seed, 0x64617461));
}

std::vector<LayerShape> RunConfig::ModelShapes() const {
  return MlpShapes(data.dims, hidden, static_cast<std::size_t>(data.classes));
}

Endpoint RunConfig::ServerEndpoint() const {
  return {network.server_upload, network.server_download, network.server_sigma};
}

std::vector<Endpoint> RunConfig::ClientEndpoints() const {
  std::vector<Endpoint> out;
  for (std::size_t i = 0; i < clients; ++i) {
    out.push_back({network.client_upload[i], network.client_download[i],
                   network.client_sigma[i]});
  }
  return out;
}

void Validate(const RunConfig& c) {
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " +
                      std::to_string(c.schema_version));
  }
  ValidateToggles(c.EffectiveToggles());
  if (c.clients == 0) throw ConfigError("clients must be positive");
  const std::size_t m = c.clients;

  const auto& n = c.network;
  RequirePositive(n.server_upload, "network.server_upload");
  RequirePositive(n.server_download, "network.server_download");
  RequireNonNegative(n.server_sigma, "network.server_sigma");
  RequirePositive(n.model_size_mb, "network.model_size_mb");
  RequireLength(n.client_upload, m, "network.client_upload");
  RequireLength(n.client_download, m, "network.client_download");
  RequireLength(n.client_sigma, m, "network.client_sigma");
  for (std::size_t i = 0; i < m; ++i) {
    RequirePositive(n.client_upload[i], "network.client_upload");
    RequirePositive(n.client_download[i], "network.client_download");
    RequireNonNegative(n.client_sigma[i], "network.client_sigma");
  }

  RequireNonNegative(c.compute.seconds_per_iteration,
                     "compute.seconds_per_iteration");
  RequireLength(c.compute.factors, m, "compute.factors");
  for (double f : c.compute.factors) RequireNonNegative(f, "compute.factors");

  if (c.hidden.empty()) throw ConfigError("model.hidden must list at least one width");
  for (std::size_t h : c.hidden) {
    if (h == 0) throw ConfigError("model.hidden widths must be positive");
  }

  RequirePositive(c.train.schedule.base, "train.learning_rate.base");
  RequirePositive(c.train.schedule.decay_base, "train.learning_rate.decay_base");
  RequireNonNegative(c.train.schedule.decay_period,
                     "train.learning_rate.decay_period");
  if (c.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");

  const auto& d = c.density;
  RequireLength(d.rho_min, m, "density.rho_min");
  for (double r : d.rho_min) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("density.rho_min must be in (0, 1]");
  }
  if (!(d.delta_rho > 0.0 && d.delta_rho <= 1.0)) {
    throw ConfigError("density.delta_rho must be in (0, 1]");
  }
  if (d.pruning_interval == 0) throw ConfigError("density.pruning_interval must be positive");
  if (d.queue_capacity == 0 || d.queue_capacity > d.pruning_interval) {
    throw ConfigError("density.queue_capacity must be in [1, pruning_interval]");
  }
  if (d.patience == 0) throw ConfigError("density.patience must be positive");
  RequireNonNegative(d.min_delta, "density.min_delta");

  RequireNonNegative(c.aggregation.beta, "aggregation.beta");
  if (!(c.aggregation.eta_g > 0.0 && c.aggregation.eta_g <= 1.0)) {
    throw ConfigError("aggregation.eta_g must be in (0, 1]");
  }
  if (!(c.aggregation.alpha > 0.0 && c.aggregation.alpha <= 1.0)) {
    throw ConfigError("aggregation.alpha must be in (0, 1]");
  }

  RequireNonNegative(c.schedule.delta_t, "schedule.delta_t");
  RequireNonNegative(c.schedule.t_merge, "schedule.t_merge");
  RequirePositive(c.schedule.t_max, "schedule.t_max");
  if (c.schedule.max_rounds == 0) throw ConfigError("schedule.max_rounds must be positive");

  const auto& dp = c.data;
  if (dp.dims == 0) throw ConfigError("data.dims must be positive");
  if (dp.classes < 2) throw ConfigError("data.classes must be at least 2");
  if (dp.samples_per_client == 0) {
    throw ConfigError("data.samples_per_client must be positive");
  }
  if (dp.test_samples == 0) throw ConfigError("data.test_samples must be positive");
  RequirePositive(dp.clusters.separation, "data.separation");
  RequirePositive(dp.clusters.noise, "data.noise");
  if (dp.clusters.clusters_per_class == 0) {
    throw ConfigError("data.clusters_per_class must be positive");
  }
  RequirePositive(dp.skew_alpha, "data.skew_alpha");
  if (c.output.empty()) throw ConfigError("output must not be empty");
}

RunConfig ConfigFromJson(const json& j) {
  RunConfig c;
  ObjectReader top(j, "");
  top.Get("schema_version", c.schema_version);
  std::string variant = VariantName(c.variant);
  top.Get("variant", variant);
  c.variant = ParseVariant(variant);
  top.Get("clients", c.clients);
  top.Get("seed", c.seed);
  top.Get("output", c.output);
  const std::size_t m = c.clients;

  if (top.Has("toggles")) {
    ObjectReader t(top.Child("toggles"), "toggles");
    VariantToggles tg = TogglesFor(c.variant);
    t.Get("buffered", tg.buffered);
    t.Get("thresholded", tg.thresholded);
    t.Get("masked_aggregation", tg.masked_aggregation);
    t.Get("differential", tg.differential);
    t.Get("recovery", tg.recovery);
    t.Get("synchronous", tg.synchronous);
    t.Get("pruning", tg.pruning);
    t.RejectUnknown();
    c.toggles = tg;
  } else {
    top.Child("toggles");
  }

  {
    const NetworkProfile defaults;
    ObjectReader n(top.Child("network"), "network");
    n.Get("server_upload", c.network.server_upload);
    n.Get("server_download", c.network.server_download);
    n.Get("server_sigma", c.network.server_sigma);
    n.Get("model_size_mb", c.network.model_size_mb);
    n.GetPerClient("client_upload", m, defaults.client_upload, c.network.client_upload);
    n.GetPerClient("client_download", m, defaults.client_download,
                   c.network.client_download);
    n.GetPerClient("client_sigma", m, defaults.client_sigma, c.network.client_sigma);
    n.RejectUnknown();
  }
  {
    ObjectReader p(top.Child("compute"), "compute");
    p.Get("seconds_per_iteration", c.compute.seconds_per_iteration);
    p.GetPerClient("factors", m, {1.0}, c.compute.factors);
    p.RejectUnknown();
  }
  {
    ObjectReader p(top.Child("model"), "model");
    p.Get("hidden", c.hidden);
    p.RejectUnknown();
  }
  {
    ObjectReader t(top.Child("train"), "train");
    ObjectReader lr(t.Child("learning_rate"), "train.learning_rate");
    lr.Get("base", c.train.schedule.base);
    lr.Get("decay_base", c.train.schedule.decay_base);
    lr.Get("decay_period", c.train.schedule.decay_period);
    lr.RejectUnknown();
    t.Get("batch_size", c.train.batch_size);
    t.Get("local_iterations", c.train.local_iterations);
    t.RejectUnknown();
  }
  {
    const DensityParams defaults;
    ObjectReader d(top.Child("density"), "density");
    d.GetPerClient("rho_min", m, defaults.rho_min, c.density.rho_min);
    d.Get("delta_rho", c.density.delta_rho);
    d.Get("pruning_interval", c.density.pruning_interval);
    d.Get("queue_capacity", c.density.queue_capacity);
    std::string policy = PolicyName(c.density.policy);
    d.Get("policy", policy);
    c.density.policy = ParsePolicy(policy);
    d.Get("patience", c.density.patience);
    d.Get("min_delta", c.density.min_delta);
    d.RejectUnknown();
  }
  {
    ObjectReader a(top.Child("aggregation"), "aggregation");
    a.Get("beta", c.aggregation.beta);
    a.Get("eta_g", c.aggregation.eta_g);
    a.Get("alpha", c.aggregation.alpha);
    a.RejectUnknown();
  }
  {
    ObjectReader s(top.Child("schedule"), "schedule");
    s.Get("delta_t", c.schedule.delta_t);
    s.Get("t_merge", c.schedule.t_merge);
    s.Get("t_max", c.schedule.t_max);
    s.Get("max_rounds", c.schedule.max_rounds);
    s.Get("stop_on_plateau", c.schedule.stop_on_plateau);
    s.RejectUnknown();
  }
  {
    ObjectReader d(top.Child("data"), "data");
    d.Get("dims", c.data.dims);
    d.Get("classes", c.data.classes);
    d.Get("samples_per_client", c.data.samples_per_client);
    d.Get("test_samples", c.data.test_samples);
    d.Get("separation", c.data.clusters.separation);
    d.Get("clusters_per_class", c.data.clusters.clusters_per_class);
    d.Get("noise", c.data.clusters.noise);
    std::string mode = PartitionModeName(c.data.partition);
    d.Get("partition", mode);
    c.data.partition = ParsePartitionMode(mode);
    d.Get("skew_alpha", c.data.skew_alpha);
    if (d.Has("seed")) {
      std::uint64_t s = 0;
      d.Get("seed", s);
      c.data.seed = s;
    } else {
      d.Child("seed");
    }
    d.RejectUnknown();
  }
  top.RejectUnknown();
  Validate(c);
  return c;
}

json ConfigToJson(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["variant"] = VariantName(c.variant);
  if (c.toggles) {
    const auto& t = *c.toggles;
    j["toggles"] = {{"buffered", t.buffered},
                    {"thresholded", t.thresholded},
                    {"masked_aggregation", t.masked_aggregation},
                    {"differential", t.differential},
                    {"recovery", t.recovery},
                    {"synchronous", t.synchronous},
                    {"pruning", t.pruning}};
  }
  j["clients"] = c.clients;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["network"] = {{"server_upload", c.network.server_upload},
                  {"server_download", c.network.server_download},
                  {"server_sigma", c.network.server_sigma},
                  {"client_upload", c.network.client_upload},
                  {"client_download", c.network.client_download},
                  {"client_sigma", c.network.client_sigma},
                  {"model_size_mb", c.network.model_size_mb}};
  j["compute"] = {{"seconds_per_iteration", c.compute.seconds_per_iteration},
                  {"factors", c.compute.factors}};
  j["model"] = {{"hidden", c.hidden}};
  j["train"] = {{"learning_rate",
                 {{"base", c.train.schedule.base},
                  {"decay_base", c.train.schedule.decay_base},
                  {"decay_period", c.train.schedule.decay_period}}},
                {"batch_size", c.train.batch_size},
                {"local_iterations", c.train.local_iterations}};
  j["density"] = {{"rho_min", c.density.rho_min},
                  {"delta_rho", c.density.delta_rho},
                  {"pruning_interval", c.density.pruning_interval},
                  {"queue_capacity", c.density.queue_capacity},
                  {"policy", PolicyName(c.density.policy)},
                  {"patience", c.density.patience},
                  {"min_delta", c.density.min_delta}};
  j["aggregation"] = {{"beta", c.aggregation.beta},
                      {"eta_g", c.aggregation.eta_g},
                      {"alpha", c.aggregation.alpha}};
  j["schedule"] = {{"delta_t", c.schedule.delta_t},
                   {"t_merge", c.schedule.t_merge},
                   {"t_max", c.schedule.t_max},
                   {"max_rounds", c.schedule.max_rounds},
                   {"stop_on_plateau", c.schedule.stop_on_plateau}};
  j["data"] = {{"dims", c.data.dims},
               {"classes", c.data.classes},
               {"samples_per_client", c.data.samples_per_client},
               {"test_samples", c.data.test_samples},
               {"separation", c.data.clusters.separation},
               {"clusters_per_class", c.data.clusters.clusters_per_class},
               {"noise", c.data.clusters.noise},
               {"partition", PartitionModeName(c.data.partition)},
               {"skew_alpha", c.data.skew_alpha}};
  if (c.data.seed) j["data"]["seed"] = *c.data.seed;
  return j;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return ConfigFromJson(j);
}

}  // namespace prfl
