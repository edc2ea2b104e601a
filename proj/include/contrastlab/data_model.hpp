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

#ifndef CONTRASTLAB_DATA_MODEL_HPP_
#define CONTRASTLAB_DATA_MODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {

// The signal-noise distribution: one patch carries y * mu, the other carries
// Gaussian noise with covariance sigma_p^2 (I - mu mu^T / |mu|^2).
class DataModelParams {
 public:
  // Throws ConfigError when |mu| = 0, d < 2 or sigma_p < 0.
  DataModelParams(Vector mu, double sigma_p);

  const Vector& mu() const { return mu_; }
  double sigma_p() const { return sigma_p_; }
  Index d() const { return mu_.size(); }
  double mu_norm() const { return mu_norm_; }
  double mu_norm_sq() const { return mu_norm_sq_; }

 private:
  Vector mu_;
  double sigma_p_;
  double mu_norm_;
  double mu_norm_sq_;
};

// mu = norm * e_1. Noise is rotation invariant, so the direction is immaterial.
DataModelParams synthetic_params(Index d, double sigma_p, double mu_norm);

// |mu| / (sigma_p sqrt(d)). Throws Error("infinite SNR") when sigma_p = 0.
double snr(const DataModelParams& params);

struct SamplePair {
  Vector patch1;
  Vector patch2;
  int label = 1;            // +1 or -1
  int signal_position = 1;  // 1 or 2

  const Vector& signal_patch() const { return signal_position == 1 ? patch1 : patch2; }
  const Vector& noise_patch() const { return signal_position == 1 ? patch2 : patch1; }
  Vector patch_sum() const { return patch1 + patch2; }
};

enum class DatasetKind { kPretrainUnlabeled, kFinetuneLabeled, kTest };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

struct Dataset {
  std::vector<SamplePair> samples;
  DatasetKind kind = DatasetKind::kFinetuneLabeled;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(samples.size()); }
  Index d() const { return samples.empty() ? 0 : samples.front().patch1.size(); }
};

Vector sample_noise(const DataModelParams& params, Rng& rng);
SamplePair sample_datapoint(const DataModelParams& params, Rng& rng);
// Ideal augmentation: a fresh draw from P(x | y = sample.label). The signal
// position is redrawn.
SamplePair augment(const SamplePair& sample, const DataModelParams& params, Rng& rng);

Dataset make_dataset(const DataModelParams& params, Index n, DatasetKind kind,
                     std::uint64_t seed);
// Index-wise augmentation of every sample in `data`.
Dataset augment_dataset(const Dataset& data, const DataModelParams& params,
                        std::uint64_t seed);

// Row i is patch1 + patch2 of sample i.
Matrix patch_sums(const Dataset& data);
// Row i is patch `position` (1 or 2) of sample i.
Matrix patch_matrix(const Dataset& data, int position);
// Row i is the noise patch of sample i.
Matrix noise_matrix(const Dataset& data);
// Labels of a labeled dataset. Throws for pretrain_unlabeled data.
Vector labels(const Dataset& data);
// Labels of any dataset; reserved for diagnostics (A_0, reports).
Vector diagnostic_labels(const Dataset& data);

struct ConcentrationReport {
  double min_norm_sq = 0.0;
  double max_norm_sq = 0.0;
  double norm_lower = 0.0;  // sigma_p^2 d / 2
  double norm_upper = 0.0;  // 3 sigma_p^2 d / 2
  double max_abs_inner = 0.0;
  double inner_bound = 0.0;  // 2 sigma_p^2 sqrt(d log(4 n^2 / delta))
  bool norms_ok = true;
  bool inner_ok = true;
  std::vector<std::string> warnings;
};

// Norm and pairwise inner-product concentration of the noise patches. When
// `other` is given, the pairwise check runs between data[i] and other[i]
// (sample vs. its augmentation); otherwise over all pairs i != i'.
ConcentrationReport check_noise_concentration(const Dataset& data,
                                              const DataModelParams& params,
                                              double delta,
                                              const Dataset* other = nullptr);

// CSV: label,signal_position,x1_1..x1_d,x2_1..x2_d with exact round-trip.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, DatasetKind kind, std::uint64_t seed);

// Binary "SNDM": magic, version u32 = 1, d u32, n u32, then per sample
// label, signal_position, patch1, patch2 as little-endian f64.
void write_dataset_binary(std::ostream& out, const Dataset& data);
Dataset read_dataset_binary(std::istream& in, DatasetKind kind, std::uint64_t seed);

// Same container for a dense matrix: version u32 = 2, cols u32, rows u32, then
// row-major f64 entries.
void write_matrix_binary(std::ostream& out, const Matrix& m);
Matrix read_matrix_binary(std::istream& in);

}  // namespace contrastlab

#endif  // CONTRASTLAB_DATA_MODEL_HPP_
