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

#include "contrastlab/baseline.hpp"

#include <cmath>
#include <optional>

#include "contrastlab/decomposition.hpp"
#include "contrastlab/rng.hpp"

namespace contrastlab {

FinetuneResult run_baseline_on(const FinetuneState& init, const Dataset& train,
                               const DataModelParams& params, const FinetuneConfig& config,
                               const Dataset* test, bool with_basis) {
  const LabeledBatch batch(train);
  std::optional<NoiseBasis> basis;
  if (with_basis) basis.emplace(NoiseBasis::from_dataset(train, params));
  FinetuneRunOptions options;
  options.test = test;
  options.basis = basis ? &*basis : nullptr;
  return finetune_run(init, batch, config, options);
}

BaselineResult run_baseline(const DataModelParams& params, Index n, const FinetuneConfig& config,
                            std::uint64_t seed, double sigma0, const Dataset* test) {
  config.validate();
  BaselineResult out;
  out.train = make_dataset(params, n, DatasetKind::kFinetuneLabeled, derive_seed(seed, {1}));
  Rng rng(derive_seed(seed, {2}));
  const FinetuneState init = init_gaussian(config.m, params.d(), sigma0, rng);
  std::optional<Dataset> own_test;
  if (test == nullptr) {
    own_test = make_test_set(params, config.test_size, derive_seed(seed, {3}));
    test = &*own_test;
  }
  // Noise vectors live in the (d-1)-dimensional complement of mu, so a basis
  // exists only for n < d - 1.
  const bool with_basis = n < params.d() - 1;
  out.run = run_baseline_on(init, out.train, params, config, test, with_basis);
  const double s = snr(params);
  out.n_snr_q = static_cast<double>(n) * std::pow(s, config.q);
  out.inv_n_snr_q = 1.0 / out.n_snr_q;
  return out;
}

}  // namespace contrastlab
