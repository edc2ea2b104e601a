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

#include "contrastlab/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "contrastlab/io.hpp"

namespace contrastlab {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr Index kTestChunk = 256;

Matrix apply_relu_q(const Matrix& v, double q) {
  return v.unaryExpr([q](double z) { return relu_q(z, q); });
}

Matrix apply_relu_q_prime(const Matrix& v, double q) {
  return v.unaryExpr([q](double z) { return relu_q_prime(z, q); });
}

Vector forward_rows(const Matrix& w_pos, const Matrix& w_neg, const Matrix& x1,
                    const Matrix& x2, double q) {
  const double inv_m = 1.0 / static_cast<double>(w_pos.rows());
  const Vector pos = (apply_relu_q(x1 * w_pos.transpose(), q) +
                      apply_relu_q(x2 * w_pos.transpose(), q)).rowwise().sum();
  const Vector neg = (apply_relu_q(x1 * w_neg.transpose(), q) +
                      apply_relu_q(x2 * w_neg.transpose(), q)).rowwise().sum();
  return inv_m * (pos - neg);
}

Matrix bank_gradient(const Matrix& w, double j, const LabeledBatch& batch,
                     const Vector& coef, double q) {
  const double scale = j / (static_cast<double>(batch.n()) * static_cast<double>(w.rows()));
  const Matrix s1 = coef.asDiagonal() * apply_relu_q_prime(batch.x1 * w.transpose(), q);
  const Matrix s2 = coef.asDiagonal() * apply_relu_q_prime(batch.x2 * w.transpose(), q);
  Matrix g = s1.transpose() * batch.x1;
  g.noalias() += s2.transpose() * batch.x2;
  return scale * g;
}

BankGradient gradient_from_derivs(const FinetuneState& state, const LabeledBatch& batch,
                                  const Vector& derivs, double q) {
  const Vector coef = derivs.cwiseProduct(batch.y);
  return {bank_gradient(state.w_pos, 1.0, batch, coef, q),
          bank_gradient(state.w_neg, -1.0, batch, coef, q)};
}

double mean_loss(const Vector& margins) {
  double acc = 0.0;
  for (Index i = 0; i < margins.size(); ++i) acc += logistic_loss(margins(i));
  return acc / static_cast<double>(margins.size());
}

const Matrix& bank(const FinetuneState& s, int b) { return b == 0 ? s.w_pos : s.w_neg; }

}  // namespace

void FinetuneConfig::validate() const {
  if (m < 1) throw ConfigError("finetune.m must be >= 1");
  if (!(q > 2.0)) throw ConfigError("finetune.q must be > 2");
  if (!(eta >= 0.0)) throw ConfigError("finetune.eta must be >= 0");
  if (iterations < 0) throw ConfigError("finetune.iterations must be >= 0");
  if (iterations > t_star_cap) throw ConfigError("finetune.iterations exceeds t_star_cap");
  if (test_size < 1) throw ConfigError("finetune.test_size must be >= 1");
  if (eval_every < 1) throw ConfigError("finetune.eval_every must be >= 1");
}

double relu_q(double z, double q) {
  if (z <= 0.0) return 0.0;
  if (q == 3.0) return z * z * z;
  return std::pow(z, q);
}

double relu_q_prime(double z, double q) {
  if (z <= 0.0) return 0.0;
  if (q == 3.0) return 3.0 * z * z;
  return q * std::pow(z, q - 1.0);
}

double logistic_loss(double z) {
  if (z > 30.0) return std::exp(-z);
  if (z < -30.0) return -z;
  return std::log1p(std::exp(-z));
}

double logistic_loss_derivative(double z) {
  if (z > 30.0) return -std::exp(-z);
  return -1.0 / (1.0 + std::exp(z));
}

LabeledBatch::LabeledBatch(const Dataset& data)
    : x1(patch_matrix(data, 1)),
      x2(patch_matrix(data, 2)),
      y(labels(data)),
      xi(noise_matrix(data)),
      xi_norm_sq(xi.rowwise().squaredNorm()) {}

double cnn_forward(const FinetuneState& state, const SamplePair& sample, double q) {
  if (sample.patch1.size() != state.d()) throw Error("cnn_forward: dimension mismatch");
  const double inv_m = 1.0 / static_cast<double>(state.m());
  double f = 0.0;
  for (Index r = 0; r < state.m(); ++r) {
    f += relu_q(state.w_pos.row(r).dot(sample.patch1), q) +
         relu_q(state.w_pos.row(r).dot(sample.patch2), q);
    f -= relu_q(state.w_neg.row(r).dot(sample.patch1), q) +
         relu_q(state.w_neg.row(r).dot(sample.patch2), q);
  }
  return inv_m * f;
}

Vector cnn_forward(const FinetuneState& state, const LabeledBatch& batch, double q) {
  if (batch.d() != state.d()) throw Error("cnn_forward: dimension mismatch");
  return forward_rows(state.w_pos, state.w_neg, batch.x1, batch.x2, q);
}

double train_loss(const FinetuneState& state, const LabeledBatch& batch, double q) {
  return mean_loss(cnn_forward(state, batch, q).cwiseProduct(batch.y));
}

Vector loss_derivatives(const FinetuneState& state, const LabeledBatch& batch, double q) {
  return cnn_forward(state, batch, q).cwiseProduct(batch.y).unaryExpr(
      [](double z) { return logistic_loss_derivative(z); });
}

BankGradient finetune_gradient(const FinetuneState& state, const LabeledBatch& batch, double q) {
  return gradient_from_derivs(state, batch, loss_derivatives(state, batch, q), q);
}

FinetuneState gd_step(FinetuneState state, const LabeledBatch& batch, double q, double eta) {
  const Vector margins = cnn_forward(state, batch, q).cwiseProduct(batch.y);
  if (!std::isfinite(mean_loss(margins)))
    throw NumericalError("fine-tuning diverged at step " + std::to_string(state.step));
  const Vector derivs = margins.unaryExpr([](double z) { return logistic_loss_derivative(z); });
  const BankGradient g = gradient_from_derivs(state, batch, derivs, q);
  state.w_pos -= eta * g.pos;
  state.w_neg -= eta * g.neg;
  ++state.step;
  return state;
}

CoefficientTracker::CoefficientTracker(const FinetuneState& initial, const LabeledBatch& batch,
                                       const NoiseBasis& basis)
    : batch_(&batch), basis_(&basis) {
  if (basis.n() != batch.n() || basis.d() != batch.d())
    throw Error("coefficient tracker: basis does not match the fine-tuning set");
  base_ = direct(initial);
  track_ = base_;
  const Index m = initial.m();
  dgamma_ = Matrix::Zero(2, m);
  prev_dgamma_ = dgamma_;
  for (int b = 0; b < 2; ++b) {
    track_.rho_bar[static_cast<std::size_t>(b)].setZero();
    track_.rho_under[static_cast<std::size_t>(b)].setZero();
  }
  prev_bar_ = track_.rho_bar;
  prev_under_ = track_.rho_under;
}

CoefficientTrack CoefficientTracker::direct(const FinetuneState& state) const {
  CoefficientTrack out;
  const Index m = state.m();
  const Index n = basis_->n();
  out.gamma.resize(2, m);
  for (int b = 0; b < 2; ++b) {
    const double j = b == 0 ? 1.0 : -1.0;
    const auto decs = decompose_bank(bank(state, b), *basis_);
    Matrix rho(m, n);
    for (Index r = 0; r < m; ++r) {
      out.gamma(b, r) = j * decs[static_cast<std::size_t>(r)].gamma;
      rho.row(r) = decs[static_cast<std::size_t>(r)].rho.transpose();
    }
    out.rho.push_back(rho);
    // Split of the change since t = 0 by class membership.
    Matrix bar = Matrix::Zero(m, n), under = Matrix::Zero(m, n);
    if (!base_.rho.empty()) {
      const Matrix delta = rho - base_.rho[static_cast<std::size_t>(b)];
      for (Index i = 0; i < n; ++i) {
        if (batch_->y(i) == j)
          bar.col(i) = delta.col(i);
        else
          under.col(i) = delta.col(i);
      }
    }
    out.rho_bar.push_back(bar);
    out.rho_under.push_back(under);
  }
  return out;
}

void CoefficientTracker::advance(const FinetuneState& pre, const Vector& derivs, double q,
                                 double eta) {
  const LabeledBatch& bt = *batch_;
  const Index n = bt.n();
  const Index m = pre.m();
  const double scale = eta / (static_cast<double>(n) * static_cast<double>(m));
  const double mu2 = basis_->mu_norm_sq();
  for (int b = 0; b < 2; ++b) {
    const auto sb = static_cast<std::size_t>(b);
    const double j = b == 0 ? 1.0 : -1.0;
    const Matrix& w = bank(pre, b);
    const Matrix noise_proj = bt.xi * w.transpose();  // n x m
    const Vector signal_proj = w * basis_->mu();      // m
    for (Index r = 0; r < m; ++r) {
      double gsum = 0.0;
      for (Index i = 0; i < n; ++i) {
        gsum += derivs(i) * relu_q_prime(bt.y(i) * signal_proj(r), q);
        const double step =
            scale * derivs(i) * relu_q_prime(noise_proj(i, r), q) * bt.xi_norm_sq(i);
        if (bt.y(i) == j)
          track_.rho_bar[sb](r, i) -= step;
        else
          track_.rho_under[sb](r, i) += step;
      }
      dgamma_(b, r) -= scale * gsum * mu2;
    }
    track_.gamma.row(b) = base_.gamma.row(b) + dgamma_.row(b);
    track_.rho[sb] = base_.rho[sb] + track_.rho_bar[sb] + track_.rho_under[sb];
  }
  ++t_;
}

double CoefficientTracker::cross_check(const FinetuneState& state, double tolerance) const {
  const CoefficientTrack dir = direct(state);
  double worst = 0.0;
  auto check = [&](double rec, double d, int j, Index r, Index i) {
    const double err = std::abs(rec - d) / (1.0 + std::abs(d));
    worst = std::max(worst, err);
    if (!(err <= tolerance)) {
      std::ostringstream msg;
      msg << "coefficient modes disagree at t=" << t_ << " j=" << j << " r=" << r
          << " i=" << i << ": recurrence " << rec << " vs direct " << d;
      throw CoefficientMismatch(msg.str(), t_, j, r, i);
    }
  };
  for (int b = 0; b < 2; ++b) {
    const int j = b == 0 ? 1 : -1;
    for (Index r = 0; r < state.m(); ++r) {
      check(track_.gamma(b, r), dir.gamma(b, r), j, r, -1);
      for (Index i = 0; i < basis_->n(); ++i)
        check(track_.rho[static_cast<std::size_t>(b)](r, i),
              dir.rho[static_cast<std::size_t>(b)](r, i), j, r, i);
    }
  }
  return worst;
}

std::vector<std::string> CoefficientTracker::check_invariants() {
  std::vector<std::string> out;
  auto fail = [&](const std::string& what, int b, Index r, Index i) {
    std::ostringstream msg;
    msg << what << " at t=" << t_ << " j=" << (b == 0 ? 1 : -1) << " r=" << r << " i=" << i;
    out.push_back(msg.str());
  };
  const Index m = dgamma_.cols();
  for (int b = 0; b < 2; ++b) {
    const auto sb = static_cast<std::size_t>(b);
    const double j = b == 0 ? 1.0 : -1.0;
    for (Index r = 0; r < m; ++r) {
      if (dgamma_(b, r) < prev_dgamma_(b, r)) fail("gamma decreased", b, r, -1);
      for (Index i = 0; i < batch_->n(); ++i) {
        const double bar = track_.rho_bar[sb](r, i);
        const double under = track_.rho_under[sb](r, i);
        const bool own = batch_->y(i) == j;
        if (bar < 0.0) fail("rho_bar negative", b, r, i);
        if (under > 0.0) fail("rho_under positive", b, r, i);
        if (!own && bar != 0.0) fail("rho_bar off-class support", b, r, i);
        if (own && under != 0.0) fail("rho_under on-class support", b, r, i);
        if (bar < prev_bar_[sb](r, i)) fail("rho_bar decreased", b, r, i);
        if (under > prev_under_[sb](r, i)) fail("rho_under increased", b, r, i);
      }
    }
  }
  prev_dgamma_ = dgamma_;
  prev_bar_ = track_.rho_bar;
  prev_under_ = track_.rho_under;
  return out;
}

Dataset make_test_set(const DataModelParams& params, Index test_size, std::uint64_t seed) {
  Dataset test;
  test.kind = DatasetKind::kTest;
  test.seed = seed;
  test.samples.reserve(static_cast<std::size_t>(test_size));
  for (Index start = 0, chunk = 0; start < test_size; start += kTestChunk, ++chunk) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(chunk)}));
    const Index len = std::min(kTestChunk, test_size - start);
    for (Index i = 0; i < len; ++i) test.samples.push_back(sample_datapoint(params, rng));
  }
  return test;
}

TestMetrics test_metrics(const FinetuneState& state, const Dataset& test, double q) {
  if (test.size() < 1) throw Error("test_metrics: empty test set");
  const LabeledBatch batch(test);
  const Vector margins = cnn_forward(state, batch, q).cwiseProduct(batch.y);
  const double n = static_cast<double>(margins.size());
  double loss = 0.0, loss2 = 0.0, err = 0.0, err2 = 0.0;
  for (Index i = 0; i < margins.size(); ++i) {
    const double l = logistic_loss(margins(i));
    const double e = margins(i) < 0.0 ? 1.0 : (margins(i) == 0.0 ? 0.5 : 0.0);
    loss += l;
    loss2 += l * l;
    err += e;
    err2 += e * e;
  }
  TestMetrics tm;
  tm.loss = loss / n;
  tm.error = err / n;
  if (n > 1) {
    tm.loss_stderr = std::sqrt(std::max(0.0, (loss2 / n - tm.loss * tm.loss) * n / (n - 1)) / n);
    tm.error_stderr = std::sqrt(std::max(0.0, (err2 / n - tm.error * tm.error) * n / (n - 1)) / n);
  }
  return tm;
}

TestMetrics test_metrics(const FinetuneState& state, const DataModelParams& params,
                         Index test_size, std::uint64_t seed, double q) {
  return test_metrics(state, make_test_set(params, test_size, seed), q);
}

FinetuneState init_from_pretrain(const Matrix& pretrained, const FilterSplit& split) {
  const Index count = pretrained.rows();
  if (count % 2 != 0 || static_cast<Index>(split.plus.size()) != count / 2 ||
      static_cast<Index>(split.minus.size()) != count / 2)
    throw Error("init_from_pretrain: split does not match the filter bank");
  FinetuneState state;
  state.w_pos.resize(count / 2, pretrained.cols());
  state.w_neg.resize(count / 2, pretrained.cols());
  std::vector<Index> plus = split.plus, minus = split.minus;
  std::sort(plus.begin(), plus.end());
  std::sort(minus.begin(), minus.end());
  for (std::size_t r = 0; r < plus.size(); ++r) {
    if (plus[r] < 0 || plus[r] >= count || minus[r] < 0 || minus[r] >= count)
      throw Error("init_from_pretrain: split index out of range");
    state.w_pos.row(static_cast<Index>(r)) = pretrained.row(plus[r]);
    state.w_neg.row(static_cast<Index>(r)) = pretrained.row(minus[r]);
  }
  return state;
}

FinetuneState init_gaussian(Index m, Index d, double sigma0, Rng& rng) {
  if (!(sigma0 >= 0.0)) throw ConfigError("sigma0 must be >= 0");
  FinetuneState state;
  // Same draw order as a 2m-filter pre-training bank: w_pos rows, then w_neg.
  const Matrix all = rng.normal_matrix(2 * m, d, sigma0);
  state.w_pos = all.topRows(m);
  state.w_neg = all.bottomRows(m);
  return state;
}

Index default_finetune_iterations(double eta, Index m, double gamma0, double mu_norm,
                                  double epsilon, double q, Index t_star_cap) {
  if (!(eta > 0.0) || !(gamma0 > 0.0) || !std::isfinite(gamma0)) return t_star_cap;
  const double md = static_cast<double>(m);
  const double mu2 = mu_norm * mu_norm;
  const double t = md * std::pow(gamma0, -(q - 2.0)) / (eta * mu2) +
                   md * md * md / (eta * epsilon * mu2);
  if (!std::isfinite(t) || t >= static_cast<double>(t_star_cap)) return t_star_cap;
  return std::max<Index>(1, static_cast<Index>(std::ceil(t)));
}

FinetuneResult finetune_run(FinetuneState state, const LabeledBatch& batch,
                            const FinetuneConfig& config, const FinetuneRunOptions& options) {
  config.validate();
  if (state.d() != batch.d()) throw Error("finetune_run: dimension mismatch");
  FinetuneResult result;
  std::optional<CoefficientTracker> tracker;
  if (options.basis != nullptr && config.track != TrackMode::kOff)
    tracker.emplace(state, batch, *options.basis);

  const Index start = state.step;
  for (;;) {
    const Vector margins = cnn_forward(state, batch, config.q).cwiseProduct(batch.y);
    const double loss = mean_loss(margins);
    if (!std::isfinite(loss))
      throw NumericalError("fine-tuning diverged at step " + std::to_string(state.step));
    const bool at_target = loss <= config.epsilon_target;
    if (at_target && !result.reached_target) result.reached_target = state.step;
    const bool last = state.step - start >= config.iterations ||
                      (at_target && options.stop_at_target);
    if ((state.step - start) % config.eval_every == 0 || last) {
      HistoryRecord rec;
      rec.step = state.step;
      rec.train_loss = loss;
      if (options.test != nullptr) {
        const TestMetrics tm = test_metrics(state, *options.test, config.q);
        rec.test_loss = tm.loss;
        rec.test_error = tm.error;
      }
      if (options.basis != nullptr) {
        const Vector gp = state.w_pos * options.basis->mu();
        const Vector gn = -(state.w_neg * options.basis->mu());
        rec.max_gamma_pos = gp.maxCoeff();
        rec.max_gamma_neg = gn.maxCoeff();
        double mr = 0.0;
        for (const Matrix* w : {&state.w_pos, &state.w_neg}) {
          const Matrix c = options.basis->solve(Matrix(options.basis->xis() * w->transpose()));
          mr = std::max(mr, (options.basis->xi_norm_sq().asDiagonal() * c).cwiseAbs().maxCoeff());
        }
        rec.max_abs_rho = mr;
      }
      state.history.push_back(rec);
    }
    if (last) break;

    const Vector derivs = margins.unaryExpr([](double z) { return logistic_loss_derivative(z); });
    if (tracker) tracker->advance(state, derivs, config.q, config.eta);
    const BankGradient g = gradient_from_derivs(state, batch, derivs, config.q);
    state.w_pos -= config.eta * g.pos;
    state.w_neg -= config.eta * g.neg;
    ++state.step;
    if (tracker) {
      for (auto& v : tracker->check_invariants()) result.invariant_violations.push_back(std::move(v));
      if (config.track == TrackMode::kBoth)
        result.max_track_error =
            std::max(result.max_track_error, tracker->cross_check(state, config.track_tolerance));
    }
  }
  result.state = std::move(state);
  return result;
}

void write_finetune_checkpoint(std::ostream& out, const FinetuneState& state, double q) {
  io::write_magic(out, "FTUN");
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(state.m()));
  io::write_u32(out, static_cast<std::uint32_t>(state.d()));
  io::write_f64(out, q);
  io::write_u64(out, static_cast<std::uint64_t>(state.step));
  for (const Matrix* w : {&state.w_pos, &state.w_neg})
    for (Index r = 0; r < w->rows(); ++r)
      for (Index c = 0; c < w->cols(); ++c) io::write_f64(out, (*w)(r, c));
}

FinetuneState read_finetune_checkpoint(std::istream& in, double* q) {
  io::expect_magic(in, "FTUN");
  if (io::read_u32(in) != kCheckpointVersion) throw FormatError("unsupported FTUN version");
  const Index m = io::read_u32(in);
  const Index d = io::read_u32(in);
  const double qv = io::read_f64(in);
  if (q != nullptr) *q = qv;
  FinetuneState state;
  state.step = static_cast<Index>(io::read_u64(in));
  state.w_pos.resize(m, d);
  state.w_neg.resize(m, d);
  for (Matrix* w : {&state.w_pos, &state.w_neg})
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < d; ++c) (*w)(r, c) = io::read_f64(in);
  return state;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRecord>& history,
                       const std::string& pipeline) {
  if (!pipeline.empty()) out << "pipeline,";
  out << kHistoryHeader << '\n';
  for (const auto& h : history) {
    if (!pipeline.empty()) out << pipeline << ',';
    out << h.step << ',' << io::format_double(h.train_loss) << ','
        << io::format_double(h.test_loss) << ',' << io::format_double(h.test_error) << ','
        << io::format_double(h.max_gamma_pos) << ',' << io::format_double(h.max_gamma_neg)
        << ',' << io::format_double(h.max_abs_rho) << '\n';
  }
}

}  // namespace contrastlab
