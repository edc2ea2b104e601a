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

#include "contrastlab/pretrain.hpp"
#include "oracles.hpp"

namespace contrastlab {
namespace {

struct Instance {
  Matrix w;
  PretrainBatch batch;
};

Instance random_instance(std::uint64_t seed, Index n0, Index d, Index m, double scale = 0.5) {
  Rng rng(seed);
  Matrix w = rng.normal_matrix(2 * m, d, scale);
  Matrix z = rng.normal_matrix(n0, d);
  Matrix zt = rng.normal_matrix(n0, d);
  return {w, PretrainBatch(z, zt)};
}

TEST(InitFilters, ZeroScale) {
  PretrainConfig c;
  c.m = 3;
  c.sigma0 = 0.0;
  Rng rng(1);
  const PretrainState s = init_filters(c, 5, rng);
  EXPECT_EQ(s.filters.rows(), 6);
  EXPECT_EQ(s.filters.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.step, 0);
}

TEST(InitFilters, EntryVariance) {
  PretrainConfig c;
  c.m = 50;
  c.sigma0 = 0.3;
  Rng rng(2);
  const PretrainState s = init_filters(c, 1000, rng);
  const double mean = s.filters.mean();
  const double var = (s.filters.array() - mean).square().mean();
  EXPECT_NEAR(var, 0.09, 0.05 * 0.09);
}

TEST(InitFilters, Deterministic) {
  PretrainConfig c;
  c.m = 2;
  Rng a(3), b(3);
  EXPECT_EQ(init_filters(c, 7, a).filters, init_filters(c, 7, b).filters);
}

TEST(Feature, HandArithmetic) {
  PretrainState s;
  s.filters = Matrix::Zero(1, 3);
  s.filters(0, 0) = 1.0;
  SamplePair x;
  x.patch1 = Vector::Unit(3, 0);
  x.patch2 = 2.0 * Vector::Unit(3, 0);
  const Vector f = feature(s, x);
  ASSERT_EQ(f.size(), 1);
  EXPECT_EQ(f(0), 3.0);
  s.filters.setZero();
  EXPECT_EQ(feature(s, x).norm(), 0.0);
}

TEST(Feature, MatchesDenseProduct) {
  Rng rng(4);
  PretrainState s;
  s.filters = rng.normal_matrix(6, 5);
  SamplePair x;
  x.patch1 = rng.normal_vector(5);
  x.patch2 = rng.normal_vector(5);
  const Vector f = feature(s, x);
  for (Index r = 0; r < 6; ++r) {
    double e = 0.0;
    for (Index k = 0; k < 5; ++k) e += s.filters(r, k) * (x.patch1(k) + x.patch2(k));
    EXPECT_NEAR(f(r), e, 1e-12);
  }
  SamplePair bad;
  bad.patch1 = Vector::Zero(4);
  bad.patch2 = Vector::Zero(4);
  EXPECT_THROW(feature(s, bad), Error);
}

TEST(Similarity, MatchesDoubleLoop) {
  const Instance in = random_instance(5, 5, 4, 2);
  const SimilarityScores sc = similarity_scores(in.w, in.batch);
  const Matrix f = oracle::features(in.w, in.batch.z);
  const Matrix ft = oracle::features(in.w, in.batch.z_tilde);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(sc.sim(i), oracle::dot(f, i, ft, i), 1e-12);
    EXPECT_EQ(sc.cross(i, i), 0.0);
    for (Index k = 0; k < 5; ++k) {
      if (k == i) continue;
      EXPECT_NEAR(sc.cross(i, k), oracle::dot(f, i, f, k), 1e-12);
      EXPECT_EQ(sc.cross(i, k), sc.cross(k, i));
    }
  }
}

TEST(Similarity, ZeroFiltersAndSingleSample) {
  Instance in = random_instance(6, 4, 3, 2);
  in.w.setZero();
  const SimilarityScores sc = similarity_scores(in.w, in.batch);
  EXPECT_EQ(sc.sim.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sc.cross.cwiseAbs().maxCoeff(), 0.0);
  const Instance one = random_instance(7, 1, 3, 2);
  const SimilarityScores s1 = similarity_scores(one.w, one.batch);
  EXPECT_EQ(s1.sim.size(), 1);
  EXPECT_EQ(s1.cross.size(), 1);
}

TEST(Similarity, SizeMismatchThrows) {
  const DataModelParams p = synthetic_params(4, 1.0, 1.0);
  const Dataset a = make_dataset(p, 3, DatasetKind::kPretrainUnlabeled, 1);
  const Dataset b = make_dataset(p, 4, DatasetKind::kPretrainUnlabeled, 2);
  EXPECT_THROW(PretrainBatch(a, b), Error);
}

TEST(SimclrLoss, SingleSampleHasNoNegatives) {
  const Instance in = random_instance(8, 1, 4, 2);
  EXPECT_EQ(simclr_loss(in.w, in.batch, 0.5), 0.0);
}

TEST(SimclrLoss, ZeroFiltersGiveLogN) {
  Instance in = random_instance(9, 5, 4, 2);
  in.w.setZero();
  EXPECT_NEAR(simclr_loss(in.w, in.batch, 0.5), std::log(5.0), 1e-15);
}

TEST(SimclrLoss, MatchesNaiveEvaluation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = random_instance(100 + seed, 3, 4, 2);
    const double expected = oracle::simclr_loss(in.w, in.batch.z, in.batch.z_tilde, 0.7);
    EXPECT_NEAR(simclr_loss(in.w, in.batch, 0.7), expected, 1e-12);
  }
}

TEST(SimclrLoss, StableWhereNaiveOverflows) {
  Instance in = random_instance(10, 4, 3, 2, 30.0);
  const double naive = oracle::simclr_loss(in.w, in.batch.z, in.batch.z_tilde, 0.5);
  const double stable = simclr_loss(in.w, in.batch, 0.5);
  EXPECT_TRUE(std::isfinite(stable));
  if (std::isfinite(naive)) EXPECT_NEAR(stable, naive, 1e-10 * std::max(1.0, naive));
}

TEST(SimclrLoss, NonFiniteInputThrows) {
  Instance in = random_instance(11, 3, 3, 1);
  in.w(0, 0) = std::nan("");
  EXPECT_THROW(simclr_loss(in.w, in.batch, 0.5), NumericalError);
}

TEST(SimclrGradient, ZeroFiltersAndSingleSample) {
  Instance in = random_instance(12, 4, 5, 2);
  in.w.setZero();
  EXPECT_EQ(simclr_gradient(in.w, in.batch, 0.5).cwiseAbs().maxCoeff(), 0.0);
  const Instance one = random_instance(13, 1, 5, 2);
  EXPECT_EQ(simclr_gradient(one.w, one.batch, 0.5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SimclrGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Index n0 = 2 + static_cast<Index>(seed % 3);
    const Instance in = random_instance(200 + seed, n0, 6, 2);
    const double tau = 0.5;
    const Matrix g = simclr_gradient(in.w, in.batch, tau);
    const Matrix fd = oracle::finite_difference(
        [&](const Matrix& w) {
          return oracle::simclr_loss(w, in.batch.z, in.batch.z_tilde, tau);
        },
        in.w, 1e-5);
    const double rel = (g - fd).norm() / std::max(1e-12, fd.norm());
    EXPECT_LE(rel, 1e-5) << "seed " << seed;
  }
}

TEST(SimclrGradient, ReportsPairWeights) {
  const Instance in = random_instance(14, 4, 3, 2);
  PairWeights pw;
  simclr_gradient(in.w, in.batch, 0.5, &pw);
  EXPECT_NEAR(pw.loss, simclr_loss(in.w, in.batch, 0.5), 1e-14);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_EQ(pw.pair(i, i), 0.0);
    EXPECT_NEAR(pw.pair.row(i).sum(), pw.negative_mass(i), 1e-15);
    EXPECT_LT(pw.negative_mass(i), 1.0);
  }
}

TEST(PretrainRun, ZeroLearningRateKeepsFilters) {
  const Instance in = random_instance(15, 4, 3, 2);
  PretrainConfig c;
  c.m = 2;
  c.eta = 0.0;
  c.iterations = 5;
  PretrainState s;
  s.filters = in.w;
  const PretrainState out = pretrain_run(s, in.batch, c);
  EXPECT_EQ(out.filters, in.w);
  EXPECT_EQ(out.step, 5);
  EXPECT_EQ(out.loss_history.size(), 6u);
}

TEST(PretrainRun, OneStepIsGradientDescent) {
  const Instance in = random_instance(16, 4, 3, 2);
  PretrainConfig c;
  c.m = 2;
  c.eta = 0.01;
  c.iterations = 1;
  PretrainState s;
  s.filters = in.w;
  const PretrainState out = pretrain_run(s, in.batch, c);
  const Matrix expected = in.w - 0.01 * simclr_gradient(in.w, in.batch, c.tau);
  EXPECT_EQ(out.filters, expected);
  EXPECT_EQ(out.loss_history.front(), simclr_loss(in.w, in.batch, c.tau));
}

TEST(PretrainRun, HooksSeeEveryStep) {
  const Instance in = random_instance(17, 3, 3, 1);
  PretrainConfig c;
  c.m = 1;
  c.eta = 0.01;
  c.iterations = 4;
  PretrainHooks h;
  std::vector<Index> steps;
  h.on_step = [&](const PretrainStepInfo& info) { steps.push_back(info.step); };
  PretrainState s;
  s.filters = in.w;
  pretrain_run(s, in.batch, c, h);
  EXPECT_EQ(steps, (std::vector<Index>{0, 1, 2, 3}));
}

TEST(PretrainRun, DivergenceGuard) {
  Instance in = random_instance(18, 4, 3, 2, 1.0);
  PretrainConfig c;
  c.m = 2;
  c.eta = 1e6;
  c.iterations = 50;
  PretrainState s;
  s.filters = in.w;
  EXPECT_THROW(pretrain_run(s, in.batch, c), NumericalError);
}

TEST(PretrainRun, SignalAlignmentGrowsEarly) {
  const DataModelParams p = synthetic_params(400, 2.0, 10.0);
  const Dataset data = make_dataset(p, 250, DatasetKind::kPretrainUnlabeled, 21);
  const Dataset aug = augment_dataset(data, p, 22);
  PretrainConfig c;
  c.m = 40;
  c.eta = default_pretrain_eta(p);
  c.iterations = 50;
  Rng rng(23);
  PretrainState s = init_filters(c, 400, rng);
  const Vector mu_hat = p.mu() / p.mu_norm();
  std::vector<double> best;
  PretrainHooks h;
  h.record_loss = false;
  h.on_step = [&](const PretrainStepInfo& info) {
    const Vector cosines =
        (info.filters * mu_hat).cwiseAbs().cwiseQuotient(info.filters.rowwise().norm());
    best.push_back(cosines.maxCoeff());
  };
  pretrain_run(s, PretrainBatch(data, aug), c, h);
  for (std::size_t t = 1; t < best.size(); ++t) EXPECT_GT(best[t], best[t - 1]) << t;
}

TEST(PretrainConfig, Validation) {
  PretrainConfig c;
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PretrainConfig{};
  c.eta = -1e-3;
  EXPECT_THROW(c.validate(), ConfigError);
  c.eta = 0.0;
  EXPECT_NO_THROW(c.validate());
  c = PretrainConfig{};
  c.iterations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DefaultEta, ConditionProxy) {
  EXPECT_DOUBLE_EQ(default_pretrain_eta(synthetic_params(400, 2.0, 10.0)), 0.1 / 1600.0);
  EXPECT_DOUBLE_EQ(default_pretrain_eta(synthetic_params(400, 0.1, 10.0)), 0.1 / 100.0);
}

TEST(TSimclr, MatchesFormula) {
  const double M = 1, s0 = 0.01, n = 40, snr = 0.25, d = 400, m = 40, q = 3, A = 0.5, eps = 0.1;
  const double e = 1.0 / (q - 2.0);
  const double num = std::log(288.0 * std::pow(M, e) * std::pow(std::log(1.0 / s0), e) *
                              std::sqrt(std::log(d * n) * std::log(m * d))) -
                     std::log(std::pow(n, e) * std::pow(snr, q * e));
  const double expected = std::ceil(num / std::log(1.0 + (1.0 - eps) * A));
  EXPECT_EQ(compute_T_simclr(M, s0, n, snr, d, m, q, A, eps), static_cast<Index>(expected));
}

TEST(TSimclr, ClampsAndMonotone) {
  EXPECT_EQ(compute_T_simclr(1, 0.5, 1e12, 10.0, 2, 1, 3, 0.1, 0.0), 1);
  for (double A : {0.01, 0.05, 0.2, 1.0})
    EXPECT_GE(compute_T_simclr(1, 1e-4, 40, 0.25, 400, 40, 3, A, 0.1),
              compute_T_simclr(1, 1e-4, 40, 0.25, 400, 40, 3, 2 * A, 0.1));
  EXPECT_THROW(compute_T_simclr(1, 1e-4, 40, 0.25, 400, 40, 2.0, 0.1, 0.1), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
  PretrainState s;
  s.filters = Rng(5).normal_matrix(4, 3);
  s.step = 17;
  std::stringstream buf;
  write_pretrain_checkpoint(buf, s);
  EXPECT_EQ(buf.str().substr(0, 4), "SCLR");
  const PretrainState back = read_pretrain_checkpoint(buf);
  EXPECT_EQ(back.filters, s.filters);
  EXPECT_EQ(back.step, 17);
}

TEST(LossHistory, CsvHeader) {
  std::ostringstream out;
  write_loss_history_csv(out, {1.5, 0.25});
  EXPECT_EQ(out.str(), "step,loss\n0,1.5\n1,0.25\n");
}

}  // namespace
}  // namespace contrastlab
