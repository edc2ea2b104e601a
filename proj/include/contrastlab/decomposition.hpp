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

#ifndef CONTRASTLAB_DECOMPOSITION_HPP_
#define CONTRASTLAB_DECOMPOSITION_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {

inline constexpr double kMaxGramCondition = 1e12;

// {mu, xi_1..xi_n} with a Cholesky factorization of the noise Gram matrix,
// shared read-only by every decomposition against it.
class NoiseBasis {
 public:
  // `xis` rows are the noise vectors. Throws NumericalError("ill-conditioned
  // noise basis") when cond(G) > kMaxGramCondition.
  NoiseBasis(Vector mu, Matrix xis, std::uint64_t id = 0);
  static NoiseBasis from_dataset(const Dataset& finetune, const DataModelParams& params);

  const Vector& mu() const { return mu_; }
  double mu_norm_sq() const { return mu_norm_sq_; }
  const Matrix& xis() const { return xis_; }
  const Vector& xi_norm_sq() const { return xi_norm_sq_; }
  const Matrix& gram() const { return gram_; }
  double condition_number() const { return condition_; }
  Index n() const { return xis_.rows(); }
  Index d() const { return xis_.cols(); }
  std::uint64_t id() const { return id_; }

  // G^{-1} b.
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

 private:
  Vector mu_;
  double mu_norm_sq_;
  Matrix xis_;
  Vector xi_norm_sq_;
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
  double condition_ = 1.0;
  std::uint64_t id_;
};

// w = w_perp + gamma mu/|mu|^2 + sum_i rho_i xi_i/|xi_i|^2, with w_perp
// orthogonal to mu and every xi_i.
struct SignalNoiseDecomposition {
  double gamma = 0.0;
  Vector rho;
  Vector w_perp;
  std::uint64_t basis_id = 0;
};

SignalNoiseDecomposition decompose(const Vector& w, const NoiseBasis& basis);
// One decomposition per row of `filters`.
std::vector<SignalNoiseDecomposition> decompose_bank(const Matrix& filters,
                                                     const NoiseBasis& basis);
Vector reconstruct(const SignalNoiseDecomposition& dec, const NoiseBasis& basis);

struct Theorem53Report {
  std::vector<Index> I_plus;
  std::vector<Index> I_minus;
  double ratio_plus = 0.0;
  double ratio_minus = 0.0;
  double ratio_threshold = 0.0;  // M / (n snr^2)
  double max_perp_norm = 0.0;
  double max_abs_gamma = 0.0;
  double max_abs_rho = 0.0;
  double perp_bound = 0.0;         // 1 / n
  double coefficient_bound = 0.0;  // snr^{2/(q-2)} / (16 m^{2/(q-2)} n0)
  double gamma0 = std::numeric_limits<double>::quiet_NaN();
  bool ratio_plus_ok = false;
  bool ratio_minus_ok = false;
  bool perp_ok = false;
  bool gamma_bound_ok = false;
  bool rho_bound_ok = false;
};

// Greedy witness: I+ holds the floor(2m/5) largest gamma, I- the
// floor(2m/5) most negative. log(2/|gamma|) is evaluated as log(max(2/|gamma|, e)).
// `n0` only enters the coefficient bound.
Theorem53Report verify_theorem53(const std::vector<SignalNoiseDecomposition>& filters,
                                 Index n, double snr, double q, double M, Index n0);

struct FilterSplit {
  std::vector<Index> plus;   // M+, ascending
  std::vector<Index> minus;  // M-, ascending
};

// Uniform random partition of [count] into two halves. Throws for odd count.
FilterSplit split_filters(Index count, Rng& rng);

// Whether some r+ in I+ landed in M+ and some r- in I- landed in M-.
bool split_event(const FilterSplit& split, const std::vector<Index>& I_plus,
                 const std::vector<Index>& I_minus);

// min over the two banks of the best matched signal coefficient:
// max_{r in I+ cap M+} gamma_r and max_{r in I- cap M-} (-gamma_r). NaN when
// either intersection is empty.
double matched_gamma0(const Theorem53Report& report,
                      const std::vector<SignalNoiseDecomposition>& filters,
                      const FilterSplit& split);

// CSV: filter_index,gamma,rho_1..rho_n,perp_norm.
void write_decomposition_csv(std::ostream& out,
                             const std::vector<SignalNoiseDecomposition>& filters);
// key,value rows.
void write_theorem53_csv(std::ostream& out, const Theorem53Report& report);

}  // namespace contrastlab

#endif  // CONTRASTLAB_DECOMPOSITION_HPP_
