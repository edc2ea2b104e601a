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

#include "contrastlab/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "contrastlab/io.hpp"

namespace contrastlab {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void PretrainConfig::validate() const {
  if (m < 1) throw ConfigError("pretrain.m must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("pretrain.tau must be > 0");
  if (!(eta >= 0.0)) throw ConfigError("pretrain.eta must be >= 0");
  if (!(sigma0 >= 0.0)) throw ConfigError("pretrain.sigma0 must be >= 0");
  if (iterations < 1) throw ConfigError("pretrain.iterations must be >= 1");
}

double default_pretrain_eta(const DataModelParams& params) {
  const double noise_energy =
      params.sigma_p() * params.sigma_p() * static_cast<double>(params.d());
  double bound = 1.0 / params.mu_norm_sq();
  if (noise_energy > 0.0) bound = std::min(bound, 1.0 / noise_energy);
  return 0.1 * bound;
}

PretrainBatch::PretrainBatch(const Dataset& data, const Dataset& augmented)
    : PretrainBatch(patch_sums(data), patch_sums(augmented)) {}

PretrainBatch::PretrainBatch(Matrix z_rows, Matrix z_tilde_rows)
    : z(std::move(z_rows)), z_tilde(std::move(z_tilde_rows)) {
  if (z.rows() != z_tilde.rows() || z.cols() != z_tilde.cols())
    throw Error("data and augmentation are not paired index-wise");
  if (z.rows() < 1) throw Error("pre-training needs n0 >= 1");
}

PretrainState init_filters(const PretrainConfig& config, Index d, Rng& rng) {
  if (d < 1) throw ConfigError("filter dimension must be >= 1");
  PretrainState state;
  state.filters = rng.normal_matrix(2 * config.m, d, config.sigma0);
  return state;
}

Vector feature(const PretrainState& state, const SamplePair& sample) {
  if (sample.patch1.size() != state.filters.cols() ||
      sample.patch2.size() != state.filters.cols())
    throw Error("feature: sample dimension does not match filters");
  return state.filters * sample.patch1 + state.filters * sample.patch2;
}

SimilarityScores similarity_scores(const Matrix& filters, const PretrainBatch& batch) {
  if (filters.cols() != batch.d()) throw Error("filters and data differ in dimension");
  const Matrix u = batch.z * filters.transpose();
  const Matrix u_tilde = batch.z_tilde * filters.transpose();
  SimilarityScores s;
  s.sim = (u.array() * u_tilde.array()).rowwise().sum().matrix();
  s.cross = u * u.transpose();
  s.cross = 0.5 * (s.cross + s.cross.transpose()).eval();
  s.cross.diagonal().setZero();
  return s;
}

SimilarityScores similarity_scores(const PretrainState& state, const Dataset& data,
                                   const Dataset& augmented) {
  if (data.size() != augmented.size()) throw Error("similarity_scores: size mismatch");
  return similarity_scores(state.filters, PretrainBatch(data, augmented));
}

PairWeights pair_weights(const SimilarityScores& scores, double tau) {
  const Index n0 = scores.sim.size();
  if (!scores.sim.allFinite() || !scores.cross.allFinite())
    throw NumericalError("non-finite similarity score");
  PairWeights w;
  w.pair = Matrix::Zero(n0, n0);
  w.negative_mass = Vector::Zero(n0);
  w.log_normalizer = Vector::Zero(n0);
  double total = 0.0;
  for (Index i = 0; i < n0; ++i) {
    const double pos = scores.sim(i) / tau;
    double mx = pos;
    for (Index k = 0; k < n0; ++k)
      if (k != i) mx = std::max(mx, scores.cross(i, k) / tau);
    double acc = std::exp(pos - mx);
    for (Index k = 0; k < n0; ++k)
      if (k != i) acc += std::exp(scores.cross(i, k) / tau - mx);
    const double lse = mx + std::log(acc);
    w.log_normalizer(i) = lse;
    double mass = 0.0;
    for (Index k = 0; k < n0; ++k) {
      if (k == i) continue;
      const double p = std::exp(scores.cross(i, k) / tau - lse);
      w.pair(i, k) = p;
      mass += p;
    }
    w.negative_mass(i) = mass;
    total += lse - pos;
  }
  w.loss = total / static_cast<double>(n0);
  if (!std::isfinite(w.loss)) throw NumericalError("non-finite contrastive loss");
  return w;
}

double simclr_loss(const Matrix& filters, const PretrainBatch& batch, double tau) {
  return pair_weights(similarity_scores(filters, batch), tau).loss;
}

double simclr_loss(const PretrainState& state, const Dataset& data,
                   const Dataset& augmented, double tau) {
  return simclr_loss(state.filters, PretrainBatch(data, augmented), tau);
}

Matrix simclr_gradient(const Matrix& filters, const PretrainBatch& batch, double tau,
                       PairWeights* weights) {
  const Index n0 = batch.n0();
  PairWeights w = pair_weights(similarity_scores(filters, batch), tau);
  const Matrix u = batch.z * filters.transpose();
  const Matrix u_tilde = batch.z_tilde * filters.transpose();
  // Coefficients (n0 x 2m) of z_i and z~_i in the reorganized gradient:
  //   sum_i sum_{i'!=i} p_{ii'} (z_i <z_i',w> + z_i' <z_i,w> - z_i <z~_i,w> - z~_i <z_i,w>)
  const Matrix along_z = w.pair * u + w.pair.transpose() * u -
                         w.negative_mass.asDiagonal() * u_tilde;
  const Matrix along_z_tilde = w.negative_mass.asDiagonal() * u;
  Matrix grad = along_z.transpose() * batch.z - along_z_tilde.transpose() * batch.z_tilde;
  grad /= static_cast<double>(n0) * tau;
  if (!grad.allFinite()) throw NumericalError("non-finite contrastive gradient");
  if (weights != nullptr) *weights = std::move(w);
  return grad;
}

Matrix simclr_gradient(const PretrainState& state, const Dataset& data,
                       const Dataset& augmented, double tau) {
  if (data.size() != augmented.size()) throw Error("simclr_gradient: size mismatch");
  return simclr_gradient(state.filters, PretrainBatch(data, augmented), tau);
}

PretrainState pretrain_run(PretrainState state, const PretrainBatch& batch,
                           const PretrainConfig& config, const PretrainHooks& hooks) {
  config.validate();
  if (state.filters.cols() != batch.d()) throw Error("filters and data differ in dimension");
  auto guard = [](double loss, Index t) {
    if (!std::isfinite(loss) || loss > kPretrainLossCeiling) {
      std::ostringstream msg;
      msg << "pre-training diverged at step " << t << " (loss " << loss << ")";
      throw NumericalError(msg.str());
    }
  };
  PairWeights weights;
  // A resumed state already holds L(W^(step)); the loop records it again.
  if (hooks.record_loss &&
      state.loss_history.size() == static_cast<std::size_t>(state.step) + 1)
    state.loss_history.pop_back();
  for (Index t = 0; t < config.iterations; ++t) {
    const Matrix grad = simclr_gradient(state.filters, batch, config.tau, &weights);
    guard(weights.loss, state.step);
    if (hooks.record_loss) state.loss_history.push_back(weights.loss);
    if (hooks.on_step) hooks.on_step(PretrainStepInfo{state.step, state.filters, weights, grad});
    state.filters -= config.eta * grad;
    ++state.step;
  }
  const double final_loss = simclr_loss(state.filters, batch, config.tau);
  guard(final_loss, state.step);
  if (hooks.record_loss) state.loss_history.push_back(final_loss);
  return state;
}

Index compute_T_simclr(double M, double sigma0, double n, double snr, double d,
                       double m, double q, double norm_A, double eps_hat) {
  if (!(q > 2.0)) throw ConfigError("T_SimCLR requires q > 2");
  if (!(M > 0.0) || !(sigma0 > 0.0) || !(n > 0.0) || !(snr > 0.0) || !(d > 0.0) ||
      !(m > 0.0) || !(norm_A > 0.0))
    throw ConfigError("T_SimCLR inputs must be positive");
  if (!(eps_hat >= 0.0 && eps_hat < 1.0)) throw ConfigError("eps_hat must lie in [0, 1)");
  const double p = 1.0 / (q - 2.0);
  const double log_growth = std::log(288.0) + p * std::log(M) +
                            p * std::log(std::log(1.0 / sigma0)) +
                            0.5 * std::log(std::log(d * n) * std::log(m * d));
  const double log_start = p * std::log(n) + q * p * std::log(snr);
  const double numerator = log_growth - log_start;
  if (!(numerator > 0.0)) return 1;
  const double denominator = std::log1p((1.0 - eps_hat) * norm_A);
  const double ratio = std::ceil(numerator / denominator);
  if (!std::isfinite(ratio) || ratio > static_cast<double>(std::numeric_limits<Index>::max()))
    throw NumericalError("T_SimCLR overflow");
  return std::max<Index>(1, static_cast<Index>(ratio));
}

void write_pretrain_checkpoint(std::ostream& out, const PretrainState& state) {
  io::write_magic(out, "SCLR");
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(state.filters.rows()));
  io::write_u32(out, static_cast<std::uint32_t>(state.filters.cols()));
  io::write_u64(out, static_cast<std::uint64_t>(state.step));
  for (Index r = 0; r < state.filters.rows(); ++r)
    for (Index c = 0; c < state.filters.cols(); ++c) io::write_f64(out, state.filters(r, c));
}

PretrainState read_pretrain_checkpoint(std::istream& in) {
  io::expect_magic(in, "SCLR");
  if (io::read_u32(in) != kCheckpointVersion) throw FormatError("unsupported SCLR version");
  const Index rows = io::read_u32(in);
  const Index cols = io::read_u32(in);
  PretrainState state;
  state.step = static_cast<Index>(io::read_u64(in));
  state.filters.resize(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) state.filters(r, c) = io::read_f64(in);
  return state;
}

void write_loss_history_csv(std::ostream& out, const std::vector<double>& history) {
  out << "step,loss\n";
  for (std::size_t t = 0; t < history.size(); ++t)
    out << t << ',' << io::format_double(history[t]) << '\n';
}

}  // namespace contrastlab
