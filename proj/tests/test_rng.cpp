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
#include <set>

#include "contrastlab/rng.hpp"

namespace contrastlab {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(c.normal(), d.normal());
}

TEST(Rng, EngineMatchesStandardMersenneTwister) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
  Rng r(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = r.next_u64();
  EXPECT_EQ(v, 9981545732273789042ull);
}

TEST(Rng, DerivedSeedsDifferByTag) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 64; ++t) seen.insert(derive_seed(7, {t}));
  EXPECT_EQ(seen.size(), 64u);
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0));
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(s4 / n, 3.0, 0.08);
}

TEST(Rng, RademacherIsBalanced) {
  Rng r(5);
  int plus = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const int v = r.rademacher();
    ASSERT_TRUE(v == 1 || v == -1);
    plus += v == 1;
  }
  EXPECT_NEAR(plus, n / 2, 4.0 * std::sqrt(n / 4.0));
}

TEST(Rng, NormalMatrixFillsRowMajor) {
  Rng a(9), b(9);
  const Matrix m = a.normal_matrix(3, 4, 2.0);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 4; ++c) EXPECT_EQ(m(r, c), 2.0 * b.normal());
}

TEST(Rng, ZeroScaleGivesZeros) {
  Rng r(1);
  EXPECT_EQ(r.normal_vector(10, 0.0).cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace contrastlab
