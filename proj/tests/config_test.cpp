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

#include <gtest/gtest.h>

#include "prfl/error.hpp"

namespace prfl {
namespace {

using nlohmann::json;

TEST(Config, EmptyObjectGivesDefaults) {
  EXPECT_EQ(ConfigFromJson(json::object()), RunConfig{});
}

TEST(Config, RoundTripDefaults) {
  const RunConfig c;
  EXPECT_EQ(ConfigFromJson(ConfigToJson(c)), c);
}

TEST(Config, RoundTripNonDefaults) {
  RunConfig c;
  c.variant = Variant::kFedFix;
  c.toggles = TogglesFor(Variant::kFedFix);
  c.clients = 3;
  c.network.client_upload = {1.0, 2.0, 3.0};
  c.network.client_download = {4.0, 5.0, 6.0};
  c.network.client_sigma = {0.0, 0.1, 0.2};
  c.compute.factors = {1.0, 1.5, 2.0};
  c.density.rho_min = {0.1, 0.2, 0.3};
  c.density.policy = PruningPolicy::kLayerwiseMagnitude;
  c.hidden = {8, 4};
  c.train.schedule = {0.125, 0.75, 40.0};
  c.schedule.delta_t = 12.5;
  c.data.seed = 99;
  c.data.partition = PartitionMode::kIid;
  c.seed = 1234567890123ULL;
  c.output = "somewhere/else";
  const auto j = ConfigToJson(c);
  EXPECT_EQ(ConfigFromJson(j), c);
  EXPECT_EQ(ConfigToJson(ConfigFromJson(j)).dump(), j.dump());
}

TEST(Config, ScalarExpandsPerClient) {
  const auto c = ConfigFromJson(json::parse(
      R"({"clients":3,"network":{"client_upload":2,"client_download":[1,2,3]},
          "compute":{"factors":1.5},"density":{"rho_min":0.25}})"));
  EXPECT_EQ(c.network.client_upload, (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(c.compute.factors, (std::vector<double>{1.5, 1.5, 1.5}));
  EXPECT_EQ(c.density.rho_min, (std::vector<double>{0.25, 0.25, 0.25}));
  // Omitted per-client fields cycle the built-in profile.
  EXPECT_EQ(c.network.client_sigma.size(), 3u);
}

TEST(Config, RejectsUnknownKeysWithPath) {
  try {
    ConfigFromJson(json::parse(R"({"network":{"server_uplod":3}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("network.server_uplod"), std::string::npos);
  }
  EXPECT_THROW(ConfigFromJson(json::parse(R"({"bogus":1})")), ConfigError);
}

TEST(Config, RejectsBadValues) {
  const char* bad[] = {
      R"({"clients":0})",
      R"({"clients":2,"network":{"client_upload":[1,2,3]}})",
      R"({"network":{"server_upload":-1}})",
      R"({"network":{"client_sigma":-0.1}})",
      R"({"density":{"rho_min":0}})",
      R"({"density":{"rho_min":1.5}})",
      R"({"density":{"pruning_interval":4,"queue_capacity":5}})",
      R"({"aggregation":{"eta_g":0}})",
      R"({"aggregation":{"alpha":2}})",
      R"({"variant":"FedMagic"})",
      R"({"density":{"policy":"random"}})",
      R"({"data":{"partition":"sorted"}})",
      R"({"schema_version":2})",
      R"({"schedule":{"max_rounds":0}})",
      R"({"train":{"batch_size":0}})",
      R"({"model":{"hidden":[]}})",
      R"({"clients":"ten"})",
      R"({"toggles":{"synchronous":true,"thresholded":true}})",
      R"({"toggles":{"pruning":false,"recovery":true}})",
      R"({"toggles":{"buffered":true,"thresholded":false,"synchronous":false}})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(ConfigFromJson(json::parse(text)), ConfigError) << text;
  }
}

TEST(Config, ZeroLocalIterationsIsValid) {
  EXPECT_NO_THROW(ConfigFromJson(json::parse(R"({"train":{"local_iterations":0}})")));
}

TEST(Config, TogglesDefaultFromVariant) {
  const auto c = ConfigFromJson(json::parse(R"({"variant":"FedAvg"})"));
  EXPECT_FALSE(c.toggles.has_value());
  EXPECT_EQ(c.EffectiveToggles(), TogglesFor(Variant::kFedAvg));
  EXPECT_TRUE(c.EffectiveToggles().synchronous);
  EXPECT_FALSE(c.EffectiveToggles().pruning);
}

TEST(Config, DerivedSeeds) {
  RunConfig a, b;
  b.seed = 2;
  EXPECT_NE(a.DataSeed(), b.DataSeed());
  b.data.seed = a.DataSeed();
  EXPECT_EQ(a.DataSeed(), b.DataSeed());
}

TEST(Config, LoadMissingFile) {
  EXPECT_THROW(LoadConfig("/nonexistent/prfl.json"), ConfigError);
}

}  // namespace
}  // namespace prfl
