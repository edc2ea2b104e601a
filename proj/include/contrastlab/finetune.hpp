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

#ifndef CONTRASTLAB_FINETUNE_HPP_
#define CONTRASTLAB_FINETUNE_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/decomposition.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {

enum class TrackMode { kOff, kRecurrence, kBoth };

struct FinetuneConfig {
  Index m = 40;                 // filters per sign
  double q = 3.0;               // ReLU^q exponent
  double eta = 0.05;
  Index iterations = 5000;      // T
  Index t_star_cap = 1000000;   // T*
  double epsilon_target = 0.05;
  Index test_size = 400;
  Index eval_every = 50;        // history stride (the final step is always recorded)
  TrackMode track = TrackMode::kBoth;
  double track_tolerance = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

double relu_q(double z, double q);
double relu_q_prime(double z, double q);

// l(z) = log(1 + exp(-z)) and l'(z) = -1 / (1 + exp(z)).
double logistic_loss(double z);
double logistic_loss_derivative(double z);

struct HistoryRecord {
  Index step = 0;
  double train_loss = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double test_error = std::numeric_limits<double>::quiet_NaN();
  double max_gamma_pos = std::numeric_limits<double>::quiet_NaN();
  double max_gamma_neg = std::numeric_limits<double>::quiet_NaN();
  double max_abs_rho = std::numeric_limits<double>::quiet_NaN();
};

// Two-layer CNN with second-layer weights fixed at +1/m (w_pos) and -1/m (w_neg).
struct FinetuneState {
  Matrix w_pos;  // m x d
  Matrix w_neg;  // m x d
  Index step = 0;
  std::vector<HistoryRecord> history;

  Index m() const { return w_pos.rows(); }
  Index d() const { return w_pos.cols(); }
};

// Patch matrices of a labeled dataset.
struct LabeledBatch {
  Matrix x1;  // n x d
  Matrix x2;  // n x d
  Vector y;
  Matrix xi;  // noise patches, n x d
  Vector xi_norm_sq;

  explicit LabeledBatch(const Dataset& data);
  Index n() const { return x1.rows(); }
  Index d() const { return x1.cols(); }
};

double cnn_forward(const FinetuneState& state, const SamplePair& sample, double q);
Vector cnn_forward(const FinetuneState& state, const LabeledBatch& batch, double q);

double train_loss(const FinetuneState& state, const LabeledBatch& batch, double q);
// l'(y_i f(W, x_i)) per sample.
Vector loss_derivatives(const FinetuneState& state, const LabeledBatch& batch, double q);

struct BankGradient {
  Matrix pos;
  Matrix neg;
};

BankGradient finetune_gradient(const FinetuneState& state, const LabeledBatch& batch, double q);

// Simultaneous update of all 2m filters. Throws NumericalError when the loss at
// the current iterate is non-finite.
FinetuneState gd_step(FinetuneState state, const LabeledBatch& batch, double q, double eta);

// Coefficient dynamics relative to the initial decomposition:
//   gamma_{j,r}(t) = gamma_{j,r}(0) + dgamma_{j,r}(t)
//   rho_{j,r,i}(t) = rho_{j,r,i}(0) + rho_bar_{j,r,i}(t) + rho_under_{j,r,i}(t)
// with gamma_{j,r} = j <w_{j,r}, mu>. Bank index 0 is j = +1, 1 is j = -1.
struct CoefficientTrack {
  Matrix gamma;                   // 2 x m, total signal coefficients
  std::vector<Matrix> rho_bar;    // 2 entries, m x n, >= 0
  std::vector<Matrix> rho_under;  // 2 entries, m x n, <= 0
  std::vector<Matrix> rho;        // 2 entries, m x n, total noise coefficients
};

class CoefficientMismatch : public NumericalError {
 public:
  CoefficientMismatch(const std::string& what, Index t, int j, Index r, Index i)
      : NumericalError(what), t(t), j(j), r(r), i(i) {}
  Index t;
  int j;
  Index r;
  Index i;  // -1 for the signal coefficient
};

class CoefficientTracker {
 public:
  CoefficientTracker(const FinetuneState& initial, const LabeledBatch& batch,
                     const NoiseBasis& basis);

  // Integrates one step of the update rules from the pre-step state.
  void advance(const FinetuneState& pre_step, const Vector& loss_derivs, double q, double eta);
  const CoefficientTrack& recurrence() const { return track_; }
  // Decomposes the actual filters against the basis.
  CoefficientTrack direct(const FinetuneState& state) const;
  // max |recurrence - direct| / (1 + |direct|) over every coefficient; throws
  // CoefficientMismatch at the first entry above `tolerance`.
  double cross_check(const FinetuneState& state, double tolerance) const;
  // Sign, support and monotonicity violations since the previous call.
  std::vector<std::string> check_invariants();
  Index steps() const { return t_; }

 private:
  const LabeledBatch* batch_;
  const NoiseBasis* basis_;
  CoefficientTrack base_;
  CoefficientTrack track_;
  Matrix dgamma_;
  Matrix prev_dgamma_;
  std::vector<Matrix> prev_bar_;
  std::vector<Matrix> prev_under_;
  Index t_ = 0;
};

struct TestMetrics {
  double loss = 0.0;
  double error = 0.0;
  double loss_stderr = 0.0;
  double error_stderr = 0.0;
};

// sign(0) ties count as half an error.
TestMetrics test_metrics(const FinetuneState& state, const Dataset& test, double q);
TestMetrics test_metrics(const FinetuneState& state, const DataModelParams& params,
                         Index test_size, std::uint64_t seed, double q);
// Test set drawn in fixed chunks with derived sub-seeds.
Dataset make_test_set(const DataModelParams& params, Index test_size, std::uint64_t seed);

FinetuneState init_from_pretrain(const Matrix& pretrained, const FilterSplit& split);
FinetuneState init_gaussian(Index m, Index d, double sigma0, Rng& rng);

// eta^-1 m gamma0^{-(q-2)} |mu|^-2 + eta^-1 eps^-1 m^3 |mu|^-2 (constant 1),
// capped at t_star_cap; the cap applies when gamma0 is not positive.
Index default_finetune_iterations(double eta, Index m, double gamma0, double mu_norm,
                                  double epsilon, double q, Index t_star_cap);

struct FinetuneResult {
  FinetuneState state;
  std::optional<Index> reached_target;  // first step with L_S <= epsilon_target
  double max_track_error = 0.0;
  std::vector<std::string> invariant_violations;
};

struct FinetuneRunOptions {
  const Dataset* test = nullptr;          // fixed test set for history metrics
  const NoiseBasis* basis = nullptr;      // enables coefficient columns / tracking
  bool stop_at_target = true;
};

// Gradient descent for config.iterations steps, halting at the first step
// whose training loss is <= epsilon_target when stop_at_target is set.
FinetuneResult finetune_run(FinetuneState state, const LabeledBatch& batch,
                            const FinetuneConfig& config, const FinetuneRunOptions& options);

// "FTUN" checkpoint: magic, version u32, m u32, d u32, q f64, step u64, both banks.
void write_finetune_checkpoint(std::ostream& out, const FinetuneState& state, double q);
FinetuneState read_finetune_checkpoint(std::istream& in, double* q = nullptr);

inline constexpr const char* kHistoryHeader =
    "step,train_loss,test_loss,test_error,max_gamma_pos,max_gamma_neg,max_abs_rho";

// History CSV; a non-empty tag prepends a `pipeline` column.
void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history,
                       const std::string& pipeline = "");

}  // namespace contrastlab

#endif  // CONTRASTLAB_FINETUNE_HPP_
