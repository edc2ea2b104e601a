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

#include "contrastlab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "contrastlab/io.hpp"

namespace contrastlab {

NoiseBasis::NoiseBasis(Vector mu, Matrix xis, std::uint64_t id)
    : mu_(std::move(mu)), xis_(std::move(xis)), id_(id) {
  if (xis_.cols() != mu_.size()) throw Error("noise basis: dimension mismatch");
  mu_norm_sq_ = mu_.squaredNorm();
  if (!(mu_norm_sq_ > 0.0)) throw Error("noise basis: signal vector is zero");
  xi_norm_sq_ = xis_.rowwise().squaredNorm();
  gram_ = xis_ * xis_.transpose();
  if (n() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition_ <= kMaxGramCondition)) throw NumericalError("ill-conditioned noise basis");
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success) throw NumericalError("ill-conditioned noise basis");
}

NoiseBasis NoiseBasis::from_dataset(const Dataset& finetune, const DataModelParams& params) {
  return NoiseBasis(params.mu(), noise_matrix(finetune), finetune.seed);
}

Vector NoiseBasis::solve(const Vector& b) const {
  if (n() == 0) return Vector();
  return llt_.solve(b);
}

Matrix NoiseBasis::solve(const Matrix& b) const {
  if (n() == 0) return Matrix(0, b.cols());
  return llt_.solve(b);
}

SignalNoiseDecomposition decompose(const Vector& w, const NoiseBasis& basis) {
  if (w.size() != basis.d()) throw Error("decompose: dimension mismatch");
  SignalNoiseDecomposition dec;
  dec.basis_id = basis.id();
  dec.gamma = w.dot(basis.mu());
  const Vector c = basis.solve(Vector(basis.xis() * w));
  dec.rho = c.cwiseProduct(basis.xi_norm_sq());
  dec.w_perp = w - basis.mu() * (dec.gamma / basis.mu_norm_sq());
  if (basis.n() > 0) dec.w_perp.noalias() -= basis.xis().transpose() * c;
  return dec;
}

std::vector<SignalNoiseDecomposition> decompose_bank(const Matrix& filters,
                                                     const NoiseBasis& basis) {
  if (filters.cols() != basis.d()) throw Error("decompose: dimension mismatch");
  const Matrix c = basis.solve(Matrix(basis.xis() * filters.transpose()));  // n x rows
  const Vector gammas = filters * basis.mu();
  std::vector<SignalNoiseDecomposition> out;
  out.reserve(static_cast<std::size_t>(filters.rows()));
  for (Index r = 0; r < filters.rows(); ++r) {
    SignalNoiseDecomposition dec;
    dec.basis_id = basis.id();
    dec.gamma = gammas(r);
    dec.w_perp = filters.row(r).transpose() - basis.mu() * (dec.gamma / basis.mu_norm_sq());
    if (basis.n() > 0) {
      dec.rho = c.col(r).cwiseProduct(basis.xi_norm_sq());
      dec.w_perp.noalias() -= basis.xis().transpose() * c.col(r);
    } else {
      dec.rho = Vector();
    }
    out.push_back(std::move(dec));
  }
  return out;
}

Vector reconstruct(const SignalNoiseDecomposition& dec, const NoiseBasis& basis) {
  Vector w = dec.w_perp + basis.mu() * (dec.gamma / basis.mu_norm_sq());
  if (basis.n() > 0)
    w.noalias() += basis.xis().transpose() * dec.rho.cwiseQuotient(basis.xi_norm_sq());
  return w;
}

namespace {

// gamma^{q-2} / log(2/gamma) with the log argument clamped below at e.
double signal_strength(double gamma, double q) {
  if (!(gamma > 0.0)) return 0.0;
  const double arg = std::max(2.0 / gamma, std::exp(1.0));
  return std::pow(gamma, q - 2.0) / std::log(arg);
}

}  // namespace

Theorem53Report verify_theorem53(const std::vector<SignalNoiseDecomposition>& filters,
                                 Index n, double snr, double q, double M, Index n0) {
  if (!(q > 2.0)) throw ConfigError("verify_theorem53 requires q > 2");
  Theorem53Report rep;
  const Index count = static_cast<Index>(filters.size());
  const Index size = count / 5;  // floor(2m / 5)
  std::vector<Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return filters[static_cast<std::size_t>(a)].gamma > filters[static_cast<std::size_t>(b)].gamma;
  });
  rep.I_plus.assign(order.begin(), order.begin() + size);
  rep.I_minus.assign(order.end() - size, order.end());
  std::sort(rep.I_plus.begin(), rep.I_plus.end());
  std::sort(rep.I_minus.begin(), rep.I_minus.end());

  for (const auto& f : filters) {
    rep.max_perp_norm = std::max(rep.max_perp_norm, f.w_perp.norm());
    rep.max_abs_gamma = std::max(rep.max_abs_gamma, std::abs(f.gamma));
    if (f.rho.size() > 0) rep.max_abs_rho = std::max(rep.max_abs_rho, f.rho.cwiseAbs().maxCoeff());
  }
  const double denom = std::pow(rep.max_abs_rho, q - 2.0);
  auto ratio = [&](const std::vector<Index>& set, double sign) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    double num = std::numeric_limits<double>::infinity();
    for (Index r : set)
      num = std::min(num, signal_strength(sign * filters[static_cast<std::size_t>(r)].gamma, q));
    if (denom == 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return num / denom;
  };
  rep.ratio_plus = ratio(rep.I_plus, 1.0);
  rep.ratio_minus = ratio(rep.I_minus, -1.0);
  rep.ratio_threshold = M / (static_cast<double>(n) * snr * snr);
  rep.ratio_plus_ok = rep.ratio_plus >= rep.ratio_threshold;
  rep.ratio_minus_ok = rep.ratio_minus >= rep.ratio_threshold;

  const double half = static_cast<double>(count) / 2.0;
  const double p = 2.0 / (q - 2.0);
  rep.perp_bound = 1.0 / static_cast<double>(n);
  rep.coefficient_bound =
      std::pow(snr, p) / (16.0 * std::pow(half, p) * static_cast<double>(n0));
  rep.perp_ok = rep.max_perp_norm <= rep.perp_bound;
  rep.gamma_bound_ok = rep.max_abs_gamma <= rep.coefficient_bound;
  rep.rho_bound_ok = rep.max_abs_rho <= rep.coefficient_bound;
  return rep;
}

FilterSplit split_filters(Index count, Rng& rng) {
  if (count < 0 || count % 2 != 0) throw Error("split_filters: filter count must be even");
  std::vector<Index> perm(static_cast<std::size_t>(count));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Fisher-Yates with the portable bounded draw.
  for (Index i = count - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  FilterSplit split;
  split.plus.assign(perm.begin(), perm.begin() + count / 2);
  split.minus.assign(perm.begin() + count / 2, perm.end());
  std::sort(split.plus.begin(), split.plus.end());
  std::sort(split.minus.begin(), split.minus.end());
  return split;
}

bool split_event(const FilterSplit& split, const std::vector<Index>& I_plus,
                 const std::vector<Index>& I_minus) {
  auto hits = [](const std::vector<Index>& bank, const std::vector<Index>& set) {
    return std::any_of(set.begin(), set.end(), [&](Index r) {
      return std::binary_search(bank.begin(), bank.end(), r);
    });
  };
  return hits(split.plus, I_plus) && hits(split.minus, I_minus);
}

double matched_gamma0(const Theorem53Report& report,
                      const std::vector<SignalNoiseDecomposition>& filters,
                      const FilterSplit& split) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double best_plus = -std::numeric_limits<double>::infinity();
  double best_minus = -std::numeric_limits<double>::infinity();
  for (Index r : report.I_plus)
    if (std::binary_search(split.plus.begin(), split.plus.end(), r))
      best_plus = std::max(best_plus, filters[static_cast<std::size_t>(r)].gamma);
  for (Index r : report.I_minus)
    if (std::binary_search(split.minus.begin(), split.minus.end(), r))
      best_minus = std::max(best_minus, -filters[static_cast<std::size_t>(r)].gamma);
  if (!std::isfinite(best_plus) || !std::isfinite(best_minus)) return nan;
  return std::min(best_plus, best_minus);
}

void write_decomposition_csv(std::ostream& out,
                             const std::vector<SignalNoiseDecomposition>& filters) {
  const Index n = filters.empty() ? 0 : filters.front().rho.size();
  out << "filter_index,gamma";
  for (Index i = 1; i <= n; ++i) out << ",rho_" << i;
  out << ",perp_norm\n";
  for (std::size_t r = 0; r < filters.size(); ++r) {
    const auto& f = filters[r];
    out << r << ',' << io::format_double(f.gamma);
    for (Index i = 0; i < f.rho.size(); ++i) out << ',' << io::format_double(f.rho(i));
    out << ',' << io::format_double(f.w_perp.norm()) << '\n';
  }
}

void write_theorem53_csv(std::ostream& out, const Theorem53Report& r) {
  auto row = [&](const char* key, double v) { out << key << ',' << io::format_double(v) << '\n'; };
  auto flag = [&](const char* key, bool v) { out << key << ',' << (v ? 1 : 0) << '\n'; };
  out << "key,value\n";
  out << "set_size," << r.I_plus.size() << '\n';
  row("ratio_plus", r.ratio_plus);
  row("ratio_minus", r.ratio_minus);
  row("ratio_threshold", r.ratio_threshold);
  row("max_perp_norm", r.max_perp_norm);
  row("max_abs_gamma", r.max_abs_gamma);
  row("max_abs_rho", r.max_abs_rho);
  row("perp_bound", r.perp_bound);
  row("coefficient_bound", r.coefficient_bound);
  row("gamma0", r.gamma0);
  flag("ratio_plus_ok", r.ratio_plus_ok);
  flag("ratio_minus_ok", r.ratio_minus_ok);
  flag("perp_ok", r.perp_ok);
  flag("gamma_bound_ok", r.gamma_bound_ok);
  flag("rho_bound_ok", r.rho_bound_ok);
}

}  // namespace contrastlab
