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

#ifndef CONTRASTLAB_PRETRAIN_HPP_
#define CONTRASTLAB_PRETRAIN_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {

struct PretrainConfig {
  Index m = 40;           // the bank holds 2m filters
  double tau = 0.5;       // temperature
  double eta = 6.25e-5;   // learning rate
  double sigma0 = 1e-4;   // Gaussian init scale
  Index iterations = 1;   // T_SimCLR
  std::uint64_t seed = 0;

  void validate() const;
};

// 0.1 * min{(sigma_p^2 d)^-1, |mu|^-2}.
double default_pretrain_eta(const DataModelParams& params);

struct PretrainState {
  Matrix filters;  // 2m x d, row r is w_r
  Index step = 0;
  std::vector<double> loss_history;
};

// Per-sample patch sums of a dataset and its index-wise augmentation:
// z.row(i) = x_i^(1) + x_i^(2), z_tilde.row(i) = the same for the augmentation.
struct PretrainBatch {
  Matrix z;
  Matrix z_tilde;

  PretrainBatch(const Dataset& data, const Dataset& augmented);
  PretrainBatch(Matrix z_rows, Matrix z_tilde_rows);
  Index n0() const { return z.rows(); }
  Index d() const { return z.cols(); }
};

PretrainState init_filters(const PretrainConfig& config, Index d, Rng& rng);

// [F(W, x)]_r = <w_r, x1> + <w_r, x2>.
Vector feature(const PretrainState& state, const SamplePair& sample);

struct SimilarityScores {
  Vector sim;    // sim_i = <F(x_i), F(x~_i)>
  Matrix cross;  // sim_{i,i'} = <F(x_i), F(x_i')>, zero diagonal
};

SimilarityScores similarity_scores(const PretrainState& state, const Dataset& data,
                                   const Dataset& augmented);
SimilarityScores similarity_scores(const Matrix& filters, const PretrainBatch& batch);

// Softmax quantities of the contrastive loss at one iterate.
//   pair(i, i') = exp(sim_{i,i'}/tau) / (exp(sim_i/tau) + sum_{i''!=i} exp(sim_{i,i''}/tau))
// with a zero diagonal; negative_mass(i) = sum_{i'} pair(i, i').
struct PairWeights {
  Matrix pair;
  Vector negative_mass;
  Vector log_normalizer;  // log of the row denominator
  double loss = 0.0;
};

PairWeights pair_weights(const SimilarityScores& scores, double tau);

double simclr_loss(const PretrainState& state, const Dataset& data,
                   const Dataset& augmented, double tau);
double simclr_loss(const Matrix& filters, const PretrainBatch& batch, double tau);

// Closed-form gradient of the contrastive loss, row r is grad_{w_r} L. Uses
// rank-one actions only; no d x d matrix is formed. When `weights` is given
// it receives the softmax weights of this iterate.
Matrix simclr_gradient(const Matrix& filters, const PretrainBatch& batch, double tau,
                       PairWeights* weights = nullptr);
Matrix simclr_gradient(const PretrainState& state, const Dataset& data,
                       const Dataset& augmented, double tau);

struct PretrainStepInfo {
  Index step;                  // t; filters are W^(t)
  const Matrix& filters;       // W^(t)
  const PairWeights& weights;  // softmax weights at W^(t)
  const Matrix& gradient;      // grad L(W^(t))
};

struct PretrainHooks {
  bool record_loss = true;
  // Called before the step t -> t+1 is applied.
  std::function<void(const PretrainStepInfo&)> on_step;
};

inline constexpr double kPretrainLossCeiling = 1e3;

// Runs config.iterations gradient steps W <- W - eta grad L. Throws
// NumericalError when the loss is non-finite or exceeds kPretrainLossCeiling.
PretrainState pretrain_run(PretrainState state, const PretrainBatch& batch,
                           const PretrainConfig& config, const PretrainHooks& hooks = {});

// Iteration count of the signal-learning schedule:
//   ceil((log[288 M^{1/(q-2)} log(1/sigma0)^{1/(q-2)} sqrt(log(dn) log(md))]
//         - log[n^{1/(q-2)} snr^{q/(q-2)}]) / log(1 + (1 - eps_hat) |A|_2)),
// clamped to 1 when the numerator is nonpositive. Throws for q <= 2.
Index compute_T_simclr(double M, double sigma0, double n, double snr, double d,
                       double m, double q, double norm_A, double eps_hat);

// "SCLR" checkpoint: magic, version u32, 2m u32, d u32, step u64, row-major f64.
void write_pretrain_checkpoint(std::ostream& out, const PretrainState& state);
PretrainState read_pretrain_checkpoint(std::istream& in);

// CSV "step,loss".
void write_loss_history_csv(std::ostream& out, const std::vector<double>& history);

}  // namespace contrastlab

#endif  // CONTRASTLAB_PRETRAIN_HPP_
