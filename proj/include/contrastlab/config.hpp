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

#ifndef CONTRASTLAB_CONFIG_HPP_
#define CONTRASTLAB_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/finetune.hpp"
#include "contrastlab/pretrain.hpp"

namespace contrastlab {

enum class DataKind { kSynthetic, kMnist };
enum class Pipeline { kSimclrFinetune, kBaseline, kBoth };

std::string to_string(Pipeline p);
Pipeline pipeline_from_string(const std::string& s);
std::string to_string(TrackMode t);
TrackMode track_mode_from_string(const std::string& s);

struct DataSpec {
  DataKind kind = DataKind::kSynthetic;
  Index d = 400;
  double sigma_p = 2.0;
  double mu_norm = 10.0;
  // MNIST signal source.
  std::string images_path;
  std::string labels_path;
  int digit_class = 0;
  Index sample_index = 0;
  std::optional<double> target_norm;
};

struct AnalysisFlags {
  bool spectral = true;
  bool decomposition = true;
  bool coefficient_track = true;
};

struct ExperimentConfig {
  DataSpec data;
  Index n0 = 250;
  Index n = 40;
  Index test_size = 400;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  bool pretrain_auto_eta = true;         // 0.1 min{(sigma_p^2 d)^-1, |mu|^-2}
  bool pretrain_auto_iterations = true;  // T_SimCLR from the measured kernel
  bool finetune_auto_eta = true;         // 5 / |mu|^2
  bool finetune_auto_iterations = true;  // measured gamma0, capped at t_star_cap
  bool stop_at_target = true;
  std::optional<double> baseline_sigma0;  // defaults to pretrain.sigma0
  double M = 1.0;
  Index spectral_k = 5;
  Pipeline pipeline = Pipeline::kBoth;
  AnalysisFlags analyses;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  double delta = 0.01;
  std::string label = "reconstruction, not paper ground truth";

  // Copies the shared fields (m, test_size, seed) into the stage configs and
  // checks every invariant. Throws ConfigError.
  void resolve();
  double baseline_init_scale() const { return baseline_sigma0.value_or(pretrain.sigma0); }
};

inline constexpr double kFinetuneEtaScale = 5.0;
inline constexpr Index kExperimentStepCap = 20000;

ExperimentConfig default_synthetic_config();
ExperimentConfig default_mnist_config(const std::string& images_path,
                                      const std::string& labels_path);

// Nested JSON text. Keys absent from the document keep the defaults of
// `base`; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text,
                              const ExperimentConfig& base = default_synthetic_config());
ExperimentConfig load_config(const std::string& path);
// Fully resolved document, stable key order.
std::string config_to_json(const ExperimentConfig& config);

// Builds the signal vector: mu = |mu| e_1 for synthetic data, the loaded
// image for MNIST.
DataModelParams make_data_params(const ExperimentConfig& config);

// Fills the learning rates marked "auto" from the data model.
void apply_data_defaults(ExperimentConfig& config, const DataModelParams& params);

struct ConditionItem {
  int item = 0;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool satisfied = true;
  std::string message;
};

// The six standing assumptions evaluated with constant 1 and logarithmic
// factors dropped. Never throws for numeric violations.
std::vector<ConditionItem> evaluate_conditions(const ExperimentConfig& config,
                                               const DataModelParams& params);
std::vector<std::string> check_condition41(const ExperimentConfig& config,
                                           const DataModelParams& params);

}  // namespace contrastlab

#endif  // CONTRASTLAB_CONFIG_HPP_
