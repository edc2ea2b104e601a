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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "contrastlab/data_model.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {
namespace {

DataModelParams paper_scale() { return synthetic_params(400, 2.0, 10.0); }

TEST(DataModelParams, RejectsInvalid) {
  EXPECT_THROW(DataModelParams(Vector::Zero(4), 1.0), ConfigError);
  EXPECT_THROW(DataModelParams(Vector::Ones(1), 1.0), ConfigError);
  EXPECT_THROW(DataModelParams(Vector::Ones(4), -1.0), ConfigError);
}

TEST(Snr, AppendixSyntheticValue) { EXPECT_DOUBLE_EQ(snr(paper_scale()), 0.25); }

TEST(Snr, UnitWhenSignalMatchesNoiseScale) {
  EXPECT_DOUBLE_EQ(snr(synthetic_params(784, 200.0, 200.0 * 28.0)), 1.0);
  Vector mu(3);
  mu << 1.0, 2.0, 2.0;
  EXPECT_DOUBLE_EQ(snr(DataModelParams(mu, 1.0 / std::sqrt(3.0))), 3.0);
}

TEST(Snr, ArbitraryParameters) {
  const double expected = 7.0 / (0.3 * std::sqrt(50.0));
  EXPECT_NEAR(snr(synthetic_params(50, 0.3, 7.0)), expected, 1e-15 * expected);
}

TEST(Snr, ZeroNoiseIsInfinite) {
  EXPECT_THROW(snr(synthetic_params(10, 0.0, 1.0)), Error);
}

TEST(SampleNoise, ZeroScaleGivesZero) {
  Rng rng(1);
  EXPECT_EQ(sample_noise(synthetic_params(10, 0.0, 3.0), rng).norm(), 0.0);
}

TEST(SampleNoise, OrthogonalToSignal) {
  Rng rng(2);
  Vector mu = Rng(99).normal_vector(50);
  const DataModelParams p(mu, 1.5);
  for (int k = 0; k < 1000; ++k) {
    const Vector xi = sample_noise(p, rng);
    ASSERT_LE(std::abs(xi.dot(mu)) / (xi.norm() * mu.norm()), 1e-9);
  }
}

TEST(SampleNoise, MeanSquaredNormIsTraceOfCovariance) {
  Rng rng(3);
  const DataModelParams p = paper_scale();
  double acc = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) acc += sample_noise(p, rng).squaredNorm();
  EXPECT_NEAR(acc / n, 4.0 * 399.0, 0.03 * 1596.0);
}

TEST(SampleDatapoint, LabelBalance) {
  Rng rng(4);
  const DataModelParams p = synthetic_params(8, 1.0, 1.0);
  int plus = 0;
  for (int k = 0; k < 10000; ++k) plus += sample_datapoint(p, rng).label == 1;
  EXPECT_GE(plus, 4700);
  EXPECT_LE(plus, 5300);
}

TEST(SampleDatapoint, ExactlyOnePatchIsSignal) {
  Rng rng(5);
  const DataModelParams p = paper_scale();
  for (int k = 0; k < 500; ++k) {
    const SamplePair s = sample_datapoint(p, rng);
    const Vector sig = static_cast<double>(s.label) * p.mu();
    const bool first = s.patch1 == sig;
    const bool second = s.patch2 == sig;
    ASSERT_NE(first, second);
    ASSERT_EQ(first ? 1 : 2, s.signal_position);
    EXPECT_EQ(s.signal_patch(), sig);
  }
}

TEST(SampleDatapoint, NoiseNormsConcentrate) {
  Rng rng(6);
  const DataModelParams p = paper_scale();
  for (int k = 0; k < 1000; ++k) {
    const double n2 = sample_datapoint(p, rng).noise_patch().squaredNorm();
    ASSERT_GE(n2, 800.0);
    ASSERT_LE(n2, 2400.0);
  }
}

TEST(Augment, PreservesLabelAndRedrawsNoise) {
  Rng rng(7);
  const DataModelParams p = paper_scale();
  int moved = 0;
  for (int k = 0; k < 500; ++k) {
    const SamplePair s = sample_datapoint(p, rng);
    const SamplePair a = augment(s, p, rng);
    const SamplePair b = augment(s, p, rng);
    ASSERT_EQ(a.label, s.label);
    ASSERT_NE(a.noise_patch(), b.noise_patch());
    ASSERT_NE(a.noise_patch(), s.noise_patch());
    moved += a.signal_position != s.signal_position;
  }
  EXPECT_GT(moved, 150);
  EXPECT_LT(moved, 350);
}

TEST(Augment, PairInnerProductsWithinBound) {
  const DataModelParams p = paper_scale();
  const Dataset data = make_dataset(p, 40, DatasetKind::kPretrainUnlabeled, 8);
  const Dataset aug = augment_dataset(data, p, 9);
  const double bound = 2.0 * 4.0 * std::sqrt(400.0 * std::log(4.0 * 1600.0 / 0.01));
  for (Index i = 0; i < 40; ++i) {
    const double ip = data.samples[i].noise_patch().dot(aug.samples[i].noise_patch());
    EXPECT_LE(std::abs(ip), bound);
  }
  const ConcentrationReport rep = check_noise_concentration(data, p, 0.01, &aug);
  EXPECT_TRUE(rep.norms_ok);
  EXPECT_TRUE(rep.inner_ok);
  EXPECT_TRUE(rep.warnings.empty());
  EXPECT_DOUBLE_EQ(rep.inner_bound, bound);
}

TEST(Concentration, WarnsOutsideRegime) {
  const DataModelParams p = synthetic_params(4, 1.0, 1.0);
  const Dataset data = make_dataset(p, 200, DatasetKind::kFinetuneLabeled, 1);
  const ConcentrationReport rep = check_noise_concentration(data, p, 0.01);
  EXPECT_FALSE(rep.norms_ok);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Dataset, SeedDeterminesContent) {
  const DataModelParams p = synthetic_params(20, 1.0, 2.0);
  const Dataset a = make_dataset(p, 30, DatasetKind::kTest, 123);
  const Dataset b = make_dataset(p, 30, DatasetKind::kTest, 123);
  const Dataset c = make_dataset(p, 30, DatasetKind::kTest, 124);
  ASSERT_EQ(a.size(), 30);
  for (Index i = 0; i < 30; ++i) {
    EXPECT_EQ(a.samples[i].patch1, b.samples[i].patch1);
    EXPECT_EQ(a.samples[i].patch2, b.samples[i].patch2);
  }
  EXPECT_NE(a.samples[0].patch1, c.samples[0].patch1);
  EXPECT_EQ(a.seed, 123u);
}

TEST(Dataset, LabelBalanceAcrossSeeds) {
  const DataModelParams p = synthetic_params(4, 1.0, 1.0);
  int good = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Dataset d = make_dataset(p, 64, DatasetKind::kFinetuneLabeled, s);
    int plus = 0;
    for (const auto& x : d.samples) plus += x.label == 1;
    good += plus >= 16 && 64 - plus >= 16;
  }
  EXPECT_GE(good, 198);
}

TEST(Dataset, UnlabeledHidesLabels) {
  const DataModelParams p = synthetic_params(4, 1.0, 1.0);
  const Dataset d = make_dataset(p, 5, DatasetKind::kPretrainUnlabeled, 1);
  EXPECT_THROW(labels(d), Error);
  EXPECT_EQ(diagnostic_labels(d).size(), 5);
}

TEST(Dataset, MatrixViews) {
  const DataModelParams p = synthetic_params(6, 1.0, 1.0);
  const Dataset d = make_dataset(p, 4, DatasetKind::kFinetuneLabeled, 1);
  const Matrix z = patch_sums(d);
  const Matrix x1 = patch_matrix(d, 1);
  const Matrix xi = noise_matrix(d);
  const Vector y = labels(d);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_EQ(Vector(z.row(i).transpose()), d.samples[i].patch_sum());
    EXPECT_EQ(Vector(x1.row(i).transpose()), d.samples[i].patch1);
    EXPECT_EQ(Vector(xi.row(i).transpose()), d.samples[i].noise_patch());
    EXPECT_EQ(y(i), d.samples[i].label);
  }
}

TEST(DatasetIo, CsvRoundTripIsExact) {
  const DataModelParams p = synthetic_params(5, 1.3, 2.0);
  const Dataset d = make_dataset(p, 7, DatasetKind::kFinetuneLabeled, 3);
  std::stringstream buf;
  write_dataset_csv(buf, d);
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "label,signal_position,x1_1,x1_2,x1_3,x1_4,x1_5,x2_1,x2_2,x2_3,x2_4,x2_5");
  const Dataset back = read_dataset_csv(buf, d.kind, d.seed);
  ASSERT_EQ(back.size(), d.size());
  for (Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, d.samples[i].label);
    EXPECT_EQ(back.samples[i].signal_position, d.samples[i].signal_position);
    EXPECT_EQ(back.samples[i].patch1, d.samples[i].patch1);
    EXPECT_EQ(back.samples[i].patch2, d.samples[i].patch2);
  }
}

TEST(DatasetIo, BinaryRoundTripIsExact) {
  const DataModelParams p = synthetic_params(5, 1.3, 2.0);
  const Dataset d = make_dataset(p, 7, DatasetKind::kTest, 3);
  std::stringstream buf;
  write_dataset_binary(buf, d);
  EXPECT_EQ(buf.str().substr(0, 4), "SNDM");
  const Dataset back = read_dataset_binary(buf, d.kind, d.seed);
  ASSERT_EQ(back.size(), d.size());
  for (Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.samples[i].patch1, d.samples[i].patch1);
    EXPECT_EQ(back.samples[i].patch2, d.samples[i].patch2);
  }
}

TEST(DatasetIo, BinaryRejectsBadInput) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_dataset_binary(bad, DatasetKind::kTest, 0), FormatError);
  const Dataset d = make_dataset(synthetic_params(3, 1.0, 1.0), 2, DatasetKind::kTest, 0);
  std::stringstream buf;
  write_dataset_binary(buf, d);
  std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 3));
  EXPECT_THROW(read_dataset_binary(cut, DatasetKind::kTest, 0), FormatError);
}

TEST(DatasetIo, MatrixBinaryRoundTrip) {
  const Matrix m = Rng(1).normal_matrix(3, 5);
  std::stringstream buf;
  write_matrix_binary(buf, m);
  EXPECT_EQ(read_matrix_binary(buf), m);
}

}  // namespace
}  // namespace contrastlab
