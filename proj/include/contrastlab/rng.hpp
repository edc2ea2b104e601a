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

#ifndef CONTRASTLAB_RNG_HPP_
#define CONTRASTLAB_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

#include "contrastlab/common.hpp"

namespace contrastlab {

// SplitMix64 finalizer. Used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a parent seed and an ordered list of tags
// (stage id, cell index, replicate, ...). Same inputs give the same seed on
// every platform.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> tags);

// Seeded random stream. The engine output of std::mt19937_64 is fixed by the
// standard; the uniform/normal transforms are implemented here so that the
// streams are identical across standard library implementations (the
// <random> distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via the Marsaglia polar method.
  double normal();
  // +1 or -1 with equal probability.
  int rademacher();

  Vector normal_vector(Index d, double scale = 1.0);
  Matrix normal_matrix(Index rows, Index cols, double scale = 1.0);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace contrastlab

#endif  // CONTRASTLAB_RNG_HPP_
