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

#include "contrastlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "contrastlab/io.hpp"

namespace contrastlab {

namespace {

double kernel_scale(double eta, double tau, Index n0) {
  const double n = static_cast<double>(n0);
  return eta / (n * n * tau);
}

double signal_scale(const ContrastKernel& k) {
  const double n = static_cast<double>(k.n0);
  const double ysum = k.labels.sum();
  return 2.0 * k.eta / (n * n * k.tau) * (n * n - ysum * ysum);
}

// Deterministic, non-degenerate start vector for the iterative solvers.
Vector start_vector(Index d, Index salt) {
  Vector v(d);
  for (Index j = 0; j < d; ++j)
    v(j) = 1.0 + 0.5 * std::sin(static_cast<double>(j + 1) * 1.618033988749895 +
                                static_cast<double>(salt));
  return v.normalized();
}

void orthogonalize(Vector& v, const Matrix& basis, Index count) {
  // Two passes of classical Gram-Schmidt.
  for (int pass = 0; pass < 2; ++pass)
    for (Index j = 0; j < count; ++j) v -= basis.col(j) * basis.col(j).dot(v);
}

}  // namespace

Vector ContrastKernel::apply(const Vector& v) const {
  if (n0 <= 1) return Vector::Zero(d());
  const double c = kernel_scale(eta, tau, n0);
  const Vector zv = z * v;
  const Vector ztv = z_tilde * v;
  const Vector s = z.colwise().sum().transpose();
  Vector out = static_cast<double>(n0 - 1) *
                   (z.transpose() * ztv + z_tilde.transpose() * zv) -
               2.0 * s * s.dot(v) + 2.0 * z.transpose() * zv;
  return c * out;
}

Vector ContrastKernel::apply_signal_part(const Vector& v) const {
  return signal_scale(*this) * mu * mu.dot(v);
}

ContrastKernel build_kernel(const Dataset& data, const Dataset& augmented,
                            const DataModelParams& params, double eta, double tau,
                            bool materialize) {
  if (data.size() != augmented.size()) throw Error("build_kernel: size mismatch");
  if (data.size() < 1) throw Error("build_kernel: n0 must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  ContrastKernel k;
  k.z = patch_sums(data);
  k.z_tilde = patch_sums(augmented);
  k.mu = params.mu();
  k.eta = eta;
  k.tau = tau;
  k.n0 = data.size();
  k.labels = diagnostic_labels(data);
  if (!materialize) return k;

  const Index d = k.d();
  if (k.n0 == 1) {
    k.A = Matrix::Zero(d, d);
  } else {
    const double c = kernel_scale(eta, tau, k.n0);
    const Vector s = k.z.colwise().sum().transpose();
    const Matrix cross = k.z.transpose() * k.z_tilde;
    Matrix a = static_cast<double>(k.n0 - 1) * (cross + cross.transpose());
    a.noalias() -= 2.0 * s * s.transpose();
    a.noalias() += 2.0 * k.z.transpose() * k.z;
    a *= c;
    k.A = 0.5 * (a + a.transpose());
  }
  k.A0 = signal_scale(k) * k.mu * k.mu.transpose();
  return k;
}

SymmetricOperator as_operator(const Matrix& A) {
  SymmetricOperator op;
  op.dim = A.rows();
  op.apply = [&A](const Vector& v) -> Vector { return A * v; };
  op.norm_bound = A.norm();
  return op;
}

SymmetricOperator kernel_operator(const ContrastKernel& kernel) {
  SymmetricOperator op;
  op.dim = kernel.d();
  op.apply = [&kernel](const Vector& v) { return kernel.apply(v); };
  if (kernel.n0 > 1) {
    const double c = kernel_scale(kernel.eta, kernel.tau, kernel.n0);
    const double zf = kernel.z.norm();
    const double ztf = kernel.z_tilde.norm();
    const double s2 = kernel.z.colwise().sum().squaredNorm();
    op.norm_bound = c * (2.0 * static_cast<double>(kernel.n0 - 1) * zf * ztf +
                         2.0 * s2 + 2.0 * zf * zf);
  }
  return op;
}

EigenPairs top_eigenpairs_power(const SymmetricOperator& op, Index k, double frobenius_hint,
                                double tol, Index max_iter) {
  const Index d = op.dim;
  if (k < 1 || k > d) throw Error("top_eigenpairs: need 1 <= k <= d");
  EigenPairs out;
  out.values.resize(k);
  out.vectors.resize(d, k);
  out.residuals.resize(k);
  out.frobenius = frobenius_hint;
  const double shift = op.norm_bound;
  const double target = tol * frobenius_hint;

  for (Index p = 0; p < k; ++p) {
    Vector v = start_vector(d, p);
    orthogonalize(v, out.vectors, p);
    if (v.norm() == 0.0) v = Vector::Unit(d, p);
    v.normalize();
    double best = std::numeric_limits<double>::infinity();
    double lambda = 0.0;
    Vector best_v = v;
    double best_lambda = 0.0;
    bool converged = false;
    for (Index it = 0; it < max_iter; ++it) {
      const Vector av = op.apply(v);
      lambda = v.dot(av);
      const double res = (av - lambda * v).norm();
      if (res < best) {
        best = res;
        best_v = v;
        best_lambda = lambda;
      }
      if (res <= target) {
        converged = true;
        break;
      }
      Vector next = av + shift * v;
      orthogonalize(next, out.vectors, p);
      const double nrm = next.norm();
      if (nrm == 0.0) {
        // v lies in the null space of the shifted operator: eigenvalue -shift.
        converged = res <= target;
        break;
      }
      v = next / nrm;
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "eigenpair " << p + 1 << " did not converge after " << max_iter
          << " iterations (best residual " << best << ")";
      throw EigenConvergenceError(msg.str(), best);
    }
    out.vectors.col(p) = best_v;
    out.values(p) = best_lambda;
    out.residuals(p) = best;
  }
  // Deflation order can interleave nearly equal eigenvalues; restore order.
  std::vector<Index> order(static_cast<std::size_t>(k));
  for (Index p = 0; p < k; ++p) order[static_cast<std::size_t>(p)] = p;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return out.values(a) > out.values(b); });
  EigenPairs sorted = out;
  for (Index p = 0; p < k; ++p) {
    const Index src = order[static_cast<std::size_t>(p)];
    sorted.values(p) = out.values(src);
    sorted.vectors.col(p) = out.vectors.col(src);
    sorted.residuals(p) = out.residuals(src);
  }
  return sorted;
}

EigenPairs top_eigenpairs(const Matrix& A, Index k, double tol, Index max_iter) {
  const Index d = A.rows();
  if (A.cols() != d) throw Error("top_eigenpairs: matrix must be square");
  if (k < 1 || k > d) throw Error("top_eigenpairs: need 1 <= k <= d");
  const double fro = A.norm();
  if (d > kDenseKernelLimit) return top_eigenpairs_power(as_operator(A), k, fro, tol, max_iter);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  EigenPairs out;
  out.frobenius = fro;
  out.values.resize(k);
  out.vectors.resize(d, k);
  out.residuals.resize(k);
  for (Index p = 0; p < k; ++p) {
    const Index src = d - 1 - p;
    out.values(p) = solver.eigenvalues()(src);
    out.vectors.col(p) = solver.eigenvectors().col(src);
    out.residuals(p) = (A * out.vectors.col(p) - out.values(p) * out.vectors.col(p)).norm();
    if (out.residuals(p) > tol * fro && fro > 0.0) {
      std::ostringstream msg;
      msg << "dense eigenpair " << p + 1 << " residual " << out.residuals(p)
          << " exceeds tolerance";
      throw EigenConvergenceError(msg.str(), out.residuals(p));
    }
  }
  return out;
}

double spectral_norm(const Matrix& M, double tol, Index max_iter) {
  if (M.size() == 0) return 0.0;
  const double fro = M.norm();
  if (fro == 0.0) return 0.0;
  Vector v = start_vector(M.cols(), 0);
  double prev = 0.0;
  for (Index it = 0; it < max_iter; ++it) {
    Vector w = M.transpose() * (M * v);
    const double val = w.norm();
    if (val == 0.0) break;
    v = w / val;
    if (it > 0 && std::abs(val - prev) <= tol * val) return std::sqrt(val);
    prev = val;
  }
  // Stalled (clustered top singular values): exact dense answer.
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

SpectralReport spectral_report(const ContrastKernel& kernel, Index k, double tol,
                               Index max_iter) {
  SpectralReport rep;
  EigenPairs pairs;
  const double base = kernel.eta / kernel.tau * kernel.mu.squaredNorm();
  if (kernel.materialized()) {
    pairs = top_eigenpairs(kernel.A, k, tol, max_iter);
    rep.delta_norm = spectral_norm(kernel.A - kernel.A0);
  } else {
    const SymmetricOperator op = kernel_operator(kernel);
    pairs = top_eigenpairs_power(op, k, op.norm_bound, tol, max_iter);
    SymmetricOperator delta;
    delta.dim = kernel.d();
    delta.apply = [&kernel](const Vector& v) {
      return Vector(kernel.apply(v) - kernel.apply_signal_part(v));
    };
    Vector v = start_vector(kernel.d(), 0);
    double prev = 0.0, val = 0.0;
    for (Index it = 0; it < max_iter; ++it) {
      Vector w = delta.apply(delta.apply(v));
      val = w.norm();
      if (val == 0.0) break;
      v = w / val;
      if (it > 0 && std::abs(val - prev) <= 1e-12 * val) break;
      prev = val;
    }
    rep.delta_norm = std::sqrt(val);
  }
  rep.eigenvalues = pairs.values;
  rep.eigenvectors = pairs.vectors;
  rep.residuals = pairs.residuals;
  rep.eps_hat = base > 0.0 ? rep.delta_norm / base : 0.0;
  const Vector mu_hat = kernel.mu.normalized();
  const Vector v1 = pairs.vectors.col(0);
  const double along = v1.dot(mu_hat);
  rep.mu_alignment = std::abs(along);
  rep.perp_residual = (v1 - along * mu_hat).norm();
  return rep;
}

bool Lemma52Verdict::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const InequalityCheck& c) { return c.passed; });
}

Lemma52Verdict lemma52_check(const ContrastKernel& kernel, const SpectralReport& report,
                             double snr, Index n0) {
  if (report.eigenvalues.size() < 2) throw Error("lemma52_check needs k >= 2 eigenpairs");
  Lemma52Verdict v;
  const double eps = report.eps_hat;
  v.eps_hat = eps;
  v.degenerate = std::abs(kernel.labels.sum()) == static_cast<double>(kernel.labels.size());
  v.near_condition_boundary = static_cast<double>(n0) * snr * snr <= 2.0;
  const double base = kernel.eta / kernel.tau * kernel.mu.squaredNorm();
  // Relative floating-point allowance for the exact rank-one case.
  const double fp = 1e-9;
  auto upper = [&](std::string name, double measured, double bound, double scale) {
    InequalityCheck c{std::move(name), measured, bound, false, bound - measured};
    c.passed = measured <= bound + fp * scale;
    v.checks.push_back(c);
  };
  auto lower = [&](std::string name, double measured, double bound, double scale) {
    InequalityCheck c{std::move(name), measured, bound, false, measured - bound};
    c.passed = measured >= bound - fp * scale;
    v.checks.push_back(c);
  };
  const double l1 = report.eigenvalues(0);
  const double l2 = report.eigenvalues(1);
  lower("lambda1_lower", l1, (1.0 - eps) * 2.0 * base, base);
  upper("lambda1_upper", l1, (1.0 + eps) * 2.0 * base, base);
  upper("rest_upper", l2, base * eps, base);
  lower("mu_alignment", report.mu_alignment, 1.0 - eps * eps, 1.0);
  upper("perp_residual", report.perp_residual, eps, 1.0);
  return v;
}

XiResult residual_xi(const ContrastKernel& kernel, const PairWeights& weights) {
  const Index n0 = kernel.n0;
  const Index d = kernel.d();
  XiResult out;
  if (n0 <= 1) {
    out.xi = Matrix::Zero(d, d);
    return out;
  }
  if (weights.pair.rows() != n0) throw Error("residual_xi: weights do not match kernel");
  // Q_{ii'} = n0 p_{ii'} - 1 off the diagonal.
  Matrix q = static_cast<double>(n0) * weights.pair;
  q.array() -= 1.0;
  q.diagonal().setZero();
  const Vector qrow = q.rowwise().sum();
  const Matrix qs = q + q.transpose();
  const Matrix weighted = qrow.asDiagonal() * kernel.z_tilde;
  Matrix xi = kernel.z.transpose() * (qs * kernel.z);
  const Matrix mixed = kernel.z.transpose() * weighted;
  xi -= mixed + mixed.transpose();
  xi *= -kernel_scale(kernel.eta, kernel.tau, n0);
  out.xi = 0.5 * (xi + xi.transpose());
  out.norm = spectral_norm(out.xi);
  return out;
}

XiResult residual_xi(const ContrastKernel& kernel, const Matrix& filters) {
  const PretrainBatch batch(kernel.z, kernel.z_tilde);
  return residual_xi(kernel, pair_weights(similarity_scores(filters, batch), kernel.tau));
}

PowerSurrogate::PowerSurrogate(Matrix filters0, const Matrix& A)
    : filters_(std::move(filters0)) {
  if (A.rows() != filters_.cols() || A.cols() != filters_.cols())
    throw Error("power surrogate: dimension mismatch");
  update_ = Matrix::Identity(A.rows(), A.cols()) + A;
}

void PowerSurrogate::step() {
  // Rows are filters: w^T <- w^T (I + A), A symmetric.
  filters_ = filters_ * update_;
  ++t_;
  if (!filters_.allFinite() || filters_.cwiseAbs().maxCoeff() > 1e300)
    throw NumericalError("power surrogate overflow at step " + std::to_string(t_));
}

std::vector<Matrix> power_surrogate(const Matrix& filters0, const Matrix& A, Index T) {
  if (T < 1) throw Error("power_surrogate: T must be >= 1");
  PowerSurrogate ps(filters0, A);
  std::vector<Matrix> traj;
  traj.reserve(static_cast<std::size_t>(T + 1));
  traj.push_back(filters0);
  for (Index t = 0; t < T; ++t) {
    ps.step();
    traj.push_back(ps.filters());
  }
  return traj;
}

Vector rowwise_cosine(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error("rowwise_cosine: shape mismatch");
  Vector c(a.rows());
  for (Index r = 0; r < a.rows(); ++r) {
    const double na = a.row(r).norm();
    const double nb = b.row(r).norm();
    c(r) = (na == 0.0 || nb == 0.0) ? (na == nb ? 1.0 : 0.0) : a.row(r).dot(b.row(r)) / (na * nb);
  }
  return c;
}

void write_spectral_report_csv(std::ostream& out, const SpectralReport& report) {
  out << "metric,value\n";
  out << "delta_norm," << io::format_double(report.delta_norm) << '\n';
  out << "eps_hat," << io::format_double(report.eps_hat) << '\n';
  out << "mu_alignment," << io::format_double(report.mu_alignment) << '\n';
  out << "perp_residual," << io::format_double(report.perp_residual) << '\n';
  out << '\n' << "k,lambda_k\n";
  for (Index p = 0; p < report.eigenvalues.size(); ++p)
    out << p + 1 << ',' << io::format_double(report.eigenvalues(p)) << '\n';
}

}  // namespace contrastlab
