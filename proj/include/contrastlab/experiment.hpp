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

#ifndef CONTRASTLAB_EXPERIMENT_HPP_
#define CONTRASTLAB_EXPERIMENT_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/config.hpp"
#include "contrastlab/decomposition.hpp"
#include "contrastlab/finetune.hpp"
#include "contrastlab/spectral.hpp"

namespace contrastlab {

// Raised when one pipeline stage fails; outputs written so far stay on disk.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Largest eps_hat fed to the T_SimCLR formula when the measured value leaves [0, 1).
inline constexpr double kEpsHatCeiling = 0.99;

// How far the pipeline runs; each value includes everything it depends on.
enum class StopAfter { kSpectral, kPretrain, kDecompose, kFinetune, kAll };

struct ExperimentOptions {
  StopAfter stop_after = StopAfter::kAll;
  bool write_outputs = true;
  std::function<void(const std::string&)> log;
};

// Sub-seed tags under the experiment seed.
enum class SeedTag : std::uint64_t {
  kPretrainData = 1,
  kAugmentation = 2,
  kPretrainInit = 3,
  kFinetuneData = 4,
  kTestSet = 5,
  kSplit = 6,
  kBaselineInit = 7,
};

std::uint64_t stage_seed(std::uint64_t seed, SeedTag tag);

struct PipelineSummary {
  std::string pipeline;
  Index final_step = 0;
  std::optional<Index> reached_target;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_error = 0.0;
  double max_track_error = 0.0;
  Index invariant_violations = 0;
  std::vector<HistoryRecord> history;
};

struct ExperimentResult {
  ExperimentConfig config;  // with every "auto" value filled in
  double snr = 0.0;
  double norm_A = 0.0;
  Index T_simclr = 0;
  std::optional<SpectralReport> spectral;
  std::optional<Lemma52Verdict> lemma52;
  double xi0_norm = 0.0;
  double xi_final_norm = 0.0;
  std::vector<double> pretrain_loss;
  std::optional<Theorem53Report> theorem53;
  bool split_event = false;
  double gamma0 = 0.0;
  std::optional<PipelineSummary> simclr;
  std::optional<PipelineSummary> baseline;
  std::vector<std::string> warnings;
  std::vector<std::string> files;  // relative to output_dir, in write order
};

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const ExperimentOptions& options = {});

// SHA-256 of "blob <size>\0" + content, lowercase hex.
std::string content_hash(const std::string& content);

inline constexpr const char* kSummaryHeader =
    "pipeline,final_step,reached_target,train_loss,test_loss,test_error,max_track_error,"
    "invariant_violations";

// Grid axes; an empty axis keeps the base config value.
struct SweepSpec {
  std::vector<Index> n;
  std::vector<Index> n0;
  std::vector<double> snr;  // realized through |mu| (synthetic) or target_norm (MNIST)
  std::vector<double> q;
  std::vector<std::uint64_t> seed;
  Index replicates = 1;
  unsigned threads = 1;
  bool write_cells = false;  // per-cell outputs under cell_<index>_rep_<r>/

  void validate() const;
};

SweepSpec parse_sweep_spec(const std::string& json_text);

struct SweepRow {
  Index cell = 0;
  Index replicate = 0;
  Index n = 0;
  Index n0 = 0;
  double snr = 0.0;
  double q = 0.0;
  std::uint64_t seed = 0;  // experiment seed of the replicate
  double n_snr_q = 0.0;
  double n0_snr2 = 0.0;
  double mu_alignment = std::numeric_limits<double>::quiet_NaN();
  double eigen_ratio = std::numeric_limits<double>::quiet_NaN();  // lambda_2 / lambda_1
  std::optional<PipelineSummary> simclr;
  std::optional<PipelineSummary> baseline;
  std::string status = "ok";
  std::string error;
};

inline constexpr const char* kSweepHeader =
    "cell,replicate,n,n0,snr,q,seed,n_snr_q,n0_snr2,mu_alignment,eigen_ratio,"
    "simclr_train_loss,simclr_test_loss,simclr_test_error,"
    "baseline_train_loss,baseline_test_loss,baseline_test_error,status,error";

// Cell configs in the fixed iteration order n, n0, snr, q, seed (outermost
// first), replicates innermost.
std::vector<ExperimentConfig> sweep_cells(const SweepSpec& spec, const ExperimentConfig& base);
std::uint64_t sweep_seed(std::uint64_t seed, Index cell, Index replicate);

// Rows follow cell order whatever the completion order; a failing cell
// becomes an error row.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const ExperimentConfig& base,
                                const ExperimentOptions& options = {});
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace contrastlab

#endif  // CONTRASTLAB_EXPERIMENT_HPP_
