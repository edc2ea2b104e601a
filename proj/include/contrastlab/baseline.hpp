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

#ifndef CONTRASTLAB_BASELINE_HPP_
#define CONTRASTLAB_BASELINE_HPP_

#include <cstdint>

#include "contrastlab/common.hpp"
#include "contrastlab/data_model.hpp"
#include "contrastlab/finetune.hpp"

namespace contrastlab {

struct BaselineResult {
  FinetuneResult run;
  Dataset train;
  double n_snr_q = 0.0;      // n * snr^q
  double inv_n_snr_q = 0.0;  // 1 / (n * snr^q)
};

// Direct supervised learning: fresh labeled data, Gaussian initialization at
// scale sigma0, then the same training loop as SimCLR fine-tuning.
BaselineResult run_baseline(const DataModelParams& params, Index n, const FinetuneConfig& config,
                            std::uint64_t seed, double sigma0, const Dataset* test = nullptr);

// Training on a caller-supplied labeled set and initial state.
FinetuneResult run_baseline_on(const FinetuneState& init, const Dataset& train,
                               const DataModelParams& params, const FinetuneConfig& config,
                               const Dataset* test = nullptr, bool with_basis = true);

}  // namespace contrastlab

#endif  // CONTRASTLAB_BASELINE_HPP_
