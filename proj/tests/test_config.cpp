// Copyright 2026 The contrastlab Authors.
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

#include <gtest/gtest.h>

#include <fstream>

#include "contrastlab/config.hpp"
#include "fixtures.hpp"

namespace contrastlab {
namespace {

bool has_warning(const std::vector<std::string>& w, int item) {
  const std::string tag = "condition item " + std::to_string(item) + " ";
  for (const auto& s : w)
    if (s.rfind(tag, 0) == 0) return true;
  return false;
}

const ConditionItem& item_of(const std::vector<ConditionItem>& items, int k) {
  for (const auto& c : items)
    if (c.item == k) return c;
  throw std::runtime_error("missing item");
}

TEST(Config, SyntheticDefaults) {
  ExperimentConfig c = default_synthetic_config();
  c.resolve();
  EXPECT_EQ(c.data.d, 400);
  EXPECT_EQ(c.n0, 250);
  EXPECT_EQ(c.n, 40);
  EXPECT_EQ(c.finetune.m, 40);
  EXPECT_EQ(c.pretrain.m, 40);
  EXPECT_EQ(c.finetune.test_size, 400);
  EXPECT_EQ(c.label, "reconstruction, not paper ground truth");
  const DataModelParams p = make_data_params(c);
  EXPECT_DOUBLE_EQ(snr(p), 0.25);
  apply_data_defaults(c, p);
  EXPECT_DOUBLE_EQ(c.pretrain.eta, 0.1 / 1600.0);
  EXPECT_DOUBLE_EQ(c.finetune.eta, 0.05);
}

TEST(Config, ParseOverridesAndKeepsDefaults) {
  const ExperimentConfig c = parse_config(R"({
    "data": {"d": 50, "mu_norm": 3.5},
    "n0": 30, "m": 6, "seed": 9,
    "pretrain": {"eta": 0.001, "iterations": 12},
    "finetune": {"track": "recurrence", "eta": 0.2},
    "baseline": {"sigma0": 0.01},
    "pipeline": "baseline",
    "analyses": {"spectral": false}
  })");
  EXPECT_EQ(c.data.d, 50);
  EXPECT_DOUBLE_EQ(c.data.mu_norm, 3.5);
  EXPECT_DOUBLE_EQ(c.data.sigma_p, 2.0);
  EXPECT_EQ(c.n0, 30);
  EXPECT_EQ(c.n, 40);
  EXPECT_EQ(c.finetune.m, 6);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_FALSE(c.pretrain_auto_eta);
  EXPECT_DOUBLE_EQ(c.pretrain.eta, 0.001);
  EXPECT_FALSE(c.pretrain_auto_iterations);
  EXPECT_EQ(c.pretrain.iterations, 12);
  EXPECT_TRUE(c.finetune_auto_iterations);
  EXPECT_EQ(c.finetune.track, TrackMode::kRecurrence);
  EXPECT_DOUBLE_EQ(c.baseline_init_scale(), 0.01);
  EXPECT_EQ(c.pipeline, Pipeline::kBaseline);
  EXPECT_FALSE(c.analyses.spectral);
  EXPECT_TRUE(c.analyses.decomposition);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"n00": 3})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"pretrain": {"temperature": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"n0": "many"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"n0": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"pretrain": {"tau": -1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"finetune": {"q": 2}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"pipeline": "neither"})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, JsonEchoRoundTrips) {
  ExperimentConfig c = parse_config(R"({"n": 12, "finetune": {"iterations": 300}, "delta": 0.1})");
  const std::string once = config_to_json(c);
  const std::string twice = config_to_json(parse_config(once));
  EXPECT_EQ(once, twice);
}

TEST(Config, LoadFromFile) {
  fixture::TempDir dir("config_file");
  const std::string path = dir.file("c.json");
  std::ofstream(path) << R"({"n": 17, "output_dir": "elsewhere"})";
  const ExperimentConfig c = load_config(path);
  EXPECT_EQ(c.n, 17);
  EXPECT_EQ(c.output_dir, "elsewhere");
}

TEST(Config, MnistKindUsesMnistDefaults) {
  fixture::TempDir dir("config_mnist");
  const fixture::IdxPair files = fixture::write_mnist_fixture(dir);
  const std::string text = std::string(R"({"data": {"kind": "mnist", "images": ")") + files.images +
                           R"(", "labels": ")" + files.labels + R"(", "digit_class": 3}})";
  ExperimentConfig c = parse_config(text);
  c.resolve();
  EXPECT_EQ(c.data.kind, DataKind::kMnist);
  EXPECT_EQ(c.finetune.m, 16);
  EXPECT_EQ(c.n0, 200);
  EXPECT_DOUBLE_EQ(c.data.sigma_p, 200.0);
  const DataModelParams p = make_data_params(c);
  EXPECT_EQ(p.d(), 784);
  EXPECT_NEAR(p.mu_norm(), 1400.0, 1e-9);
  EXPECT_NEAR(snr(p), 0.25, 1e-12);
}

TEST(Conditions, SyntheticDefaultItemOne) {
  const ExperimentConfig c = default_synthetic_config();
  const auto items = evaluate_conditions(c, make_data_params(c));
  ASSERT_EQ(items.size(), 6u);
  const ConditionItem& one = item_of(items, 1);
  EXPECT_DOUBLE_EQ(one.measured, 15.625);
  EXPECT_TRUE(one.satisfied);
  EXPECT_TRUE(item_of(items, 4).satisfied);
  EXPECT_TRUE(item_of(items, 6).satisfied);
}

TEST(Conditions, FewFiltersWarnItemFour) {
  ExperimentConfig c = parse_config(R"({"m": 2})");
  c.resolve();
  const auto w = check_condition41(c, make_data_params(c));
  EXPECT_TRUE(has_warning(w, 4));
  EXPECT_FALSE(has_warning(w, 1));
}

TEST(Conditions, LargeStepSizeWarnsItemSix) {
  ExperimentConfig c = default_synthetic_config();
  const DataModelParams p = make_data_params(c);
  const double bound = item_of(evaluate_conditions(c, p), 6).bound;
  EXPECT_DOUBLE_EQ(bound, 1.0 / 1600.0);
  c.pretrain_auto_eta = false;
  c.pretrain.eta = 100.0 * bound;
  EXPECT_TRUE(has_warning(check_condition41(c, p), 6));
  c.pretrain.eta = 0.5 * bound;
  EXPECT_FALSE(has_warning(check_condition41(c, p), 6));
}

TEST(Conditions, SmallUnlabeledSetWarnsItemOne) {
  ExperimentConfig c = parse_config(R"({"n0": 10})");
  EXPECT_TRUE(has_warning(check_condition41(c, make_data_params(c)), 1));
}

}  // namespace
}  // namespace contrastlab
