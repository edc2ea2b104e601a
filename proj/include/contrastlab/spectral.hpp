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

#ifndef CONTRASTLAB_SPECTRAL_HPP_
#define CONTRASTLAB_SPECTRAL_HPP_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/pretrain.hpp"

namespace contrastlab {

// The data-defined matrix driving the small-initialization SimCLR dynamics,
//   A = eta/(n0^2 tau) sum_i sum_{i'!=i} (z_i z~_i^T + z~_i z_i^T - z_i z_i'^T - z_i' z_i^T),
// and its signal-only part A0 = 2 eta/(n0^2 tau) [n0^2 - (sum_i y_i)^2] mu mu^T.
struct ContrastKernel {
  Matrix z;        // n0 x d
  Matrix z_tilde;  // n0 x d
  Matrix A;        // d x d; empty when not materialized
  Matrix A0;       // d x d; empty when not materialized
  Vector mu;
  double eta = 0.0;
  double tau = 1.0;
  Index n0 = 0;
  Vector labels;  // diagnostic only

  bool materialized() const { return A.size() > 0; }
  Index d() const { return z.cols(); }
  // A * v through the aggregate vectors; O(n0 d) per call.
  Vector apply(const Vector& v) const;
  Vector apply_signal_part(const Vector& v) const;
};

inline constexpr Index kDenseKernelLimit = 1024;

ContrastKernel build_kernel(const Dataset& data, const Dataset& augmented,
                            const DataModelParams& params, double eta, double tau,
                            bool materialize = true);

// Symmetric linear operator consumed by the iterative eigensolver.
struct SymmetricOperator {
  Index dim = 0;
  std::function<Vector(const Vector&)> apply;
  double norm_bound = 0.0;  // any upper bound on the spectral norm
};

SymmetricOperator as_operator(const Matrix& A);
SymmetricOperator kernel_operator(const ContrastKernel& kernel);

class EigenConvergenceError : public NumericalError {
 public:
  EigenConvergenceError(const std::string& what, double best_residual)
      : NumericalError(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

struct EigenPairs {
  Vector values;          // descending
  Matrix vectors;         // d x k, unit columns
  Vector residuals;       // |A v - lambda v|_2 per pair
  double frobenius = 0.0;
};

inline constexpr double kEigenTolerance = 1e-10;
inline constexpr Index kEigenMaxIter = 100000;

// Largest-k (algebraic) eigenpairs of a symmetric matrix. d <= 1024 uses a
// dense symmetric solver; larger d goes through power iteration.
EigenPairs top_eigenpairs(const Matrix& A, Index k, double tol = kEigenTolerance,
                          Index max_iter = kEigenMaxIter);
// Shifted power iteration with Gram-Schmidt deflation. Throws
// EigenConvergenceError when a pair misses |Av - lv| <= tol * frobenius_hint.
EigenPairs top_eigenpairs_power(const SymmetricOperator& op, Index k, double frobenius_hint,
                                double tol = kEigenTolerance,
                                Index max_iter = kEigenMaxIter);

// |M|_2 by power iteration on M^T M, with a dense fallback when it stalls.
double spectral_norm(const Matrix& M, double tol = 1e-12, Index max_iter = 20000);

struct SpectralReport {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // d x k
  Vector residuals;
  double delta_norm = 0.0;     // |A - A0|_2
  double eps_hat = 0.0;        // delta_norm / ((eta/tau) |mu|^2)
  double mu_alignment = 0.0;   // |<v1, mu>| / |mu|
  double perp_residual = 0.0;  // |P_mu_perp v1|_2
};

SpectralReport spectral_report(const ContrastKernel& kernel, Index k,
                               double tol = kEigenTolerance, Index max_iter = kEigenMaxIter);

struct InequalityCheck {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool passed = false;
  double slack = 0.0;  // positive when satisfied
};

struct Lemma52Verdict {
  bool degenerate = false;               // all labels equal, A0 = 0
  bool near_condition_boundary = false;  // n0 snr^2 <= 2
  double eps_hat = 0.0;
  std::vector<InequalityCheck> checks;   // lambda1_lower, lambda1_upper, rest_upper,
                                         // mu_alignment, perp_residual
  bool all_passed() const;
};

Lemma52Verdict lemma52_check(const ContrastKernel& kernel, const SpectralReport& report,
                             double snr, Index n0);

struct XiResult {
  Matrix xi;          // d x d
  double norm = 0.0;  // |Xi|_2
};

// Residual between the exact update operator at the current iterate and A:
// W^(t+1) rows equal (I + A + Xi) w_r^(t).
XiResult residual_xi(const ContrastKernel& kernel, const PairWeights& weights);
XiResult residual_xi(const ContrastKernel& kernel, const Matrix& filters);

// Unnormalized power iteration w <- (I + A) w applied to every filter.
class PowerSurrogate {
 public:
  PowerSurrogate(Matrix filters0, const Matrix& A);
  void step();
  const Matrix& filters() const { return filters_; }
  Index t() const { return t_; }

 private:
  Matrix filters_;
  Matrix update_;  // I + A
  Index t_ = 0;
};

// All states for t = 0..T (T + 1 entries). Throws when entries exceed 1e300.
std::vector<Matrix> power_surrogate(const Matrix& filters0, const Matrix& A, Index T);

// Row-wise cosine similarity of two filter banks.
Vector rowwise_cosine(const Matrix& a, const Matrix& b);

// Metadata block (metric,value), blank line, then k,lambda_k rows.
void write_spectral_report_csv(std::ostream& out, const SpectralReport& report);

}  // namespace contrastlab

#endif  // CONTRASTLAB_SPECTRAL_HPP_
