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

#include "contrastlab/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "contrastlab/baseline.hpp"
#include "contrastlab/io.hpp"
#include "contrastlab/mnist.hpp"
#include "contrastlab/pretrain.hpp"

namespace contrastlab {

namespace {

using json = nlohmann::ordered_json;

class OutputDir {
 public:
  OutputDir(std::string dir, bool enabled) : dir_(std::move(dir)), enabled_(enabled) {
    if (enabled_) io::ensure_directory(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    if (!enabled_) return;
    io::write_file(dir_ + "/" + name, content);
    files_.push_back({name, content_hash(content)});
  }

  template <typename F>
  void write_with(const std::string& name, F&& fill) {
    if (!enabled_) return;
    std::ostringstream out;
    fill(out);
    write(name, out.str());
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::string dir_;
  bool enabled_;
  std::vector<std::pair<std::string, std::string>> files_;
};

PipelineSummary summarize(const std::string& name, const FinetuneResult& r) {
  PipelineSummary s;
  s.pipeline = name;
  s.final_step = r.state.step;
  s.reached_target = r.reached_target;
  const HistoryRecord& last = r.state.history.back();
  s.train_loss = last.train_loss;
  s.test_loss = last.test_loss;
  s.test_error = last.test_error;
  s.max_track_error = r.max_track_error;
  s.invariant_violations = static_cast<Index>(r.invariant_violations.size());
  s.history = r.state.history;
  return s;
}

void write_summary(std::ostream& out, const std::vector<const PipelineSummary*>& rows) {
  out << kSummaryHeader << '\n';
  for (const PipelineSummary* s : rows) {
    out << s->pipeline << ',' << s->final_step << ','
        << (s->reached_target ? std::to_string(*s->reached_target) : std::string("")) << ','
        << io::format_double(s->train_loss) << ',' << io::format_double(s->test_loss) << ','
        << io::format_double(s->test_error) << ',' << io::format_double(s->max_track_error)
        << ',' << s->invariant_violations << '\n';
  }
}

// Smallest over the two banks of the largest signal coefficient, the
// initial-strength quantity that the default iteration count depends on.
double bank_gamma0(const FinetuneState& s, const Vector& mu) {
  return std::min((s.w_pos * mu).maxCoeff(), (-(s.w_neg * mu)).maxCoeff());
}

std::string hash_file(const std::string& path) { return content_hash(io::read_file(path)); }

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, SeedTag tag) {
  return derive_seed(seed, {static_cast<std::uint64_t>(tag)});
}

std::string content_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("hash context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-256 failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

ExperimentResult run_experiment(const ExperimentConfig& input, const ExperimentOptions& options) {
  ExperimentConfig config = input;
  config.resolve();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  ExperimentResult result;
  OutputDir out(config.output_dir, options.write_outputs);
  std::optional<MnistSignal> mnist;
  json manifest;
  std::string failed_stage;
  std::string failure;

  const bool want_simclr = config.pipeline != Pipeline::kBaseline;
  const bool want_baseline = config.pipeline != Pipeline::kSimclrFinetune &&
                             options.stop_after == StopAfter::kAll;

  auto finish = [&]() {
    result.config = config;
    result.files.clear();
    for (const auto& entry : out.files()) result.files.push_back(entry.first);
    if (!options.write_outputs) return;
    const std::string cfg = config_to_json(config);
    manifest["label"] = config.label;
    manifest["config_hash"] = content_hash(cfg);
    manifest["config"] = json::parse(cfg);
    json seeds;
    seeds["experiment"] = config.seed;
    seeds["pretrain_data"] = stage_seed(config.seed, SeedTag::kPretrainData);
    seeds["augmentation"] = stage_seed(config.seed, SeedTag::kAugmentation);
    seeds["pretrain_init"] = stage_seed(config.seed, SeedTag::kPretrainInit);
    seeds["finetune_data"] = stage_seed(config.seed, SeedTag::kFinetuneData);
    seeds["test_set"] = stage_seed(config.seed, SeedTag::kTestSet);
    seeds["split"] = stage_seed(config.seed, SeedTag::kSplit);
    seeds["baseline_init"] = stage_seed(config.seed, SeedTag::kBaselineInit);
    manifest["seeds"] = seeds;
    json inputs = json::object();
    if (mnist) {
      inputs["mnist"] = {{"images", mnist->images_path},
                         {"images_hash", hash_file(mnist->images_path)},
                         {"labels", mnist->labels_path},
                         {"labels_hash", hash_file(mnist->labels_path)},
                         {"digit_class", mnist->digit_class},
                         {"sample_index", mnist->sample_index},
                         {"image_index", mnist->image_index},
                         {"raw_norm", mnist->raw_norm},
                         {"target_norm", mnist->target_norm ? json(*mnist->target_norm)
                                                            : json(nullptr)}};
    }
    manifest["inputs"] = inputs;
    json files = json::array();
    for (const auto& [name, hash] : out.files()) files.push_back({{"file", name}, {"hash", hash}});
    manifest["outputs"] = files;
    manifest["warnings"] = result.warnings;
    manifest["status"] = failed_stage.empty() ? "ok" : "failed";
    if (!failed_stage.empty()) {
      manifest["failed_stage"] = failed_stage;
      manifest["error"] = failure;
    }
    io::write_file(config.output_dir + "/manifest.json", manifest.dump(2) + "\n");
    result.files.push_back("manifest.json");
  };

  try {
    // Data.
    DataModelParams params = stage("data", [&] {
      if (config.data.kind == DataKind::kMnist) {
        mnist = load_mnist_signal(config.data.images_path, config.data.labels_path,
                                  config.data.digit_class, config.data.sample_index,
                                  config.data.target_norm);
        return DataModelParams(mnist->mu, config.data.sigma_p);
      }
      return make_data_params(config);
    });
    apply_data_defaults(config, params);
    result.snr = snr(params);
    for (auto& w : check_condition41(config, params)) result.warnings.push_back(w);
    config.finetune.validate();

    std::optional<Dataset> pre, aug;
    if (want_simclr) {
      stage("data", [&] {
        pre = make_dataset(params, config.n0, DatasetKind::kPretrainUnlabeled,
                           stage_seed(config.seed, SeedTag::kPretrainData));
        aug = augment_dataset(*pre, params, stage_seed(config.seed, SeedTag::kAugmentation));
        for (auto& w : check_noise_concentration(*pre, params, config.delta, &*aug).warnings)
          result.warnings.push_back("pretrain data: " + w);
      });
    }
    const Dataset ft = stage("data", [&] {
      return make_dataset(params, config.n, DatasetKind::kFinetuneLabeled,
                          stage_seed(config.seed, SeedTag::kFinetuneData));
    });
    const Dataset test = stage("data", [&] {
      return make_test_set(params, config.test_size, stage_seed(config.seed, SeedTag::kTestSet));
    });
    for (auto& w : check_noise_concentration(ft, params, config.delta).warnings)
      result.warnings.push_back("finetune data: " + w);

    std::vector<HistoryRecord> simclr_history, baseline_history;
    std::optional<NoiseBasis> basis;
    auto need_basis = [&]() -> const NoiseBasis& {
      if (!basis) basis = stage("decompose", [&] { return NoiseBasis::from_dataset(ft, params); });
      return *basis;
    };

    std::optional<ContrastKernel> kernel;
    PretrainState pretrained;
    if (want_simclr) {
      // Spectral analysis of the contrast kernel.
      const bool need_kernel = config.analyses.spectral || config.pretrain_auto_iterations ||
                               options.stop_after == StopAfter::kSpectral;
      if (need_kernel) {
        stage("spectral", [&] {
          log("building contrast kernel");
          kernel = build_kernel(*pre, *aug, params, config.pretrain.eta, config.pretrain.tau,
                                params.d() <= kDenseKernelLimit);
          const SpectralReport rep =
              spectral_report(*kernel, std::min<Index>(config.spectral_k, params.d()));
          result.norm_A =
              kernel->materialized() ? spectral_norm(kernel->A) : std::abs(rep.eigenvalues(0));
          result.spectral = rep;
          result.lemma52 = lemma52_check(*kernel, rep, result.snr, config.n0);
          if (config.pretrain_auto_iterations) {
            double eps = rep.eps_hat;
            if (!(eps < kEpsHatCeiling)) {
              result.warnings.push_back("eps_hat " + io::format_double(eps) +
                                        " outside [0, 1); T_SimCLR uses " +
                                        io::format_double(kEpsHatCeiling));
              eps = kEpsHatCeiling;
            }
            config.pretrain.iterations = std::min<Index>(
                compute_T_simclr(config.M, config.pretrain.sigma0, static_cast<double>(config.n),
                                 result.snr, static_cast<double>(params.d()),
                                 static_cast<double>(config.pretrain.m), config.finetune.q,
                                 result.norm_A, eps),
                kExperimentStepCap);
          }
          result.T_simclr = config.pretrain.iterations;
          if (config.analyses.spectral || options.stop_after == StopAfter::kSpectral) {
            out.write_with("spectral.csv", [&](std::ostream& o) {
              write_spectral_report_csv(o, rep);
              o << '\n' << "metric,value\n";
              o << "norm_A," << io::format_double(result.norm_A) << '\n';
              o << "T_simclr," << result.T_simclr << '\n';
            });
            out.write_with("lemma52.csv", [&](std::ostream& o) {
              o << "check,measured,bound,passed,slack\n";
              for (const auto& c : result.lemma52->checks)
                o << c.name << ',' << io::format_double(c.measured) << ','
                  << io::format_double(c.bound) << ',' << (c.passed ? 1 : 0) << ','
                  << io::format_double(c.slack) << '\n';
              o << "degenerate," << (result.lemma52->degenerate ? 1 : 0) << ",,,\n";
              o << "near_condition_boundary,"
                << (result.lemma52->near_condition_boundary ? 1 : 0) << ",,,\n";
            });
          }
        });
      } else {
        result.T_simclr = config.pretrain.iterations;
      }
      if (options.stop_after == StopAfter::kSpectral) {
        finish();
        return result;
      }

      // Pre-training.
      stage("pretrain", [&] {
        log("pre-training for " + std::to_string(config.pretrain.iterations) + " steps");
        Rng rng(stage_seed(config.seed, SeedTag::kPretrainInit));
        PretrainState init = init_filters(config.pretrain, params.d(), rng);
        const PretrainBatch batch(*pre, *aug);
        const bool xi = config.analyses.spectral && kernel && kernel->materialized();
        if (xi) result.xi0_norm = residual_xi(*kernel, init.filters).norm;
        pretrained = pretrain_run(std::move(init), batch, config.pretrain);
        if (xi) result.xi_final_norm = residual_xi(*kernel, pretrained.filters).norm;
        result.pretrain_loss = pretrained.loss_history;
        out.write_with("pretrain_loss.csv",
                       [&](std::ostream& o) { write_loss_history_csv(o, pretrained.loss_history); });
        out.write_with("pretrain.sclr",
                       [&](std::ostream& o) { write_pretrain_checkpoint(o, pretrained); });
        if (xi) {
          out.write_with("xi.csv", [&](std::ostream& o) {
            o << "step,xi_norm,sigma0_norm_A\n";
            const std::string bound = io::format_double(config.pretrain.sigma0 * result.norm_A);
            o << 0 << ',' << io::format_double(result.xi0_norm) << ',' << bound << '\n';
            o << pretrained.step << ',' << io::format_double(result.xi_final_norm) << ','
              << bound << '\n';
          });
        }
      });
      if (options.stop_after == StopAfter::kPretrain) {
        finish();
        return result;
      }

      // Decomposition and split.
      FilterSplit split;
      stage("decompose", [&] {
        const NoiseBasis& b = need_basis();
        const auto decs = decompose_bank(pretrained.filters, b);
        Theorem53Report rep = verify_theorem53(decs, config.n, result.snr, config.finetune.q,
                                               config.M, config.n0);
        Rng rng(stage_seed(config.seed, SeedTag::kSplit));
        split = split_filters(pretrained.filters.rows(), rng);
        result.split_event = split_event(split, rep.I_plus, rep.I_minus);
        result.gamma0 = matched_gamma0(rep, decs, split);
        rep.gamma0 = result.gamma0;
        result.theorem53 = rep;
        if (config.analyses.decomposition) {
          out.write_with("decomposition.csv",
                         [&](std::ostream& o) { write_decomposition_csv(o, decs); });
          out.write_with("theorem53.csv", [&](std::ostream& o) {
            write_theorem53_csv(o, rep);
          });
        }
        out.write_with("split.csv", [&](std::ostream& o) {
          o << "filter_index,bank\n";
          std::vector<std::pair<Index, int>> rows;
          for (Index r : split.plus) rows.push_back({r, 1});
          for (Index r : split.minus) rows.push_back({r, -1});
          std::sort(rows.begin(), rows.end());
          for (const auto& [r, j] : rows) o << r << ',' << j << '\n';
        });
      });
      if (options.stop_after == StopAfter::kDecompose) {
        finish();
        return result;
      }

      // Fine-tuning.
      stage("finetune", [&] {
        FinetuneConfig fc = config.finetune;
        if (!config.analyses.coefficient_track) fc.track = TrackMode::kOff;
        if (config.finetune_auto_iterations)
          fc.iterations = default_finetune_iterations(fc.eta, fc.m, result.gamma0,
                                                      params.mu_norm(), fc.epsilon_target, fc.q,
                                                      fc.t_star_cap);
        log("fine-tuning for up to " + std::to_string(fc.iterations) + " steps");
        const LabeledBatch batch(ft);
        FinetuneRunOptions opt;
        opt.test = &test;
        opt.basis = config.analyses.decomposition || fc.track != TrackMode::kOff
                        ? &need_basis() : nullptr;
        opt.stop_at_target = config.stop_at_target;
        const FinetuneResult r =
            finetune_run(init_from_pretrain(pretrained.filters, split), batch, fc, opt);
        for (const auto& v : r.invariant_violations) result.warnings.push_back("simclr: " + v);
        result.simclr = summarize("simclr_finetune", r);
        out.write_with("finetune.ftun",
                       [&](std::ostream& o) { write_finetune_checkpoint(o, r.state, fc.q); });
      });
    }

    if (want_baseline) {
      stage("baseline", [&] {
        FinetuneConfig fc = config.finetune;
        if (!config.analyses.coefficient_track) fc.track = TrackMode::kOff;
        Rng rng(stage_seed(config.seed, SeedTag::kBaselineInit));
        const FinetuneState init =
            init_gaussian(fc.m, params.d(), config.baseline_init_scale(), rng);
        if (config.finetune_auto_iterations)
          fc.iterations = default_finetune_iterations(fc.eta, fc.m, bank_gamma0(init, params.mu()),
                                                      params.mu_norm(), fc.epsilon_target, fc.q,
                                                      fc.t_star_cap);
        log("baseline training for up to " + std::to_string(fc.iterations) + " steps");
        const LabeledBatch batch(ft);
        FinetuneRunOptions opt;
        opt.test = &test;
        // Coefficient columns need a noise basis, which exists only for n < d - 1.
        const bool basis_ok = config.n < params.d() - 1;
        opt.basis = basis_ok && (config.analyses.decomposition || fc.track != TrackMode::kOff)
                        ? &need_basis() : nullptr;
        opt.stop_at_target = config.stop_at_target;
        const FinetuneResult r = finetune_run(init, batch, fc, opt);
        for (const auto& v : r.invariant_violations) result.warnings.push_back("baseline: " + v);
        result.baseline = summarize("baseline", r);
      });
    }

    std::vector<const PipelineSummary*> rows;
    if (result.simclr) rows.push_back(&*result.simclr);
    if (result.baseline) rows.push_back(&*result.baseline);
    if (!rows.empty()) {
      out.write_with("history.csv", [&](std::ostream& o) {
        o << "pipeline," << kHistoryHeader << '\n';
        for (const PipelineSummary* s : rows) {
          std::ostringstream part;
          write_history_csv(part, s->history, s->pipeline);
          const std::string text = part.str();
          o << text.substr(text.find('\n') + 1);
        }
      });
      out.write_with("summary.csv", [&](std::ostream& o) { write_summary(o, rows); });
    }
  } catch (const StageError& e) {
    failed_stage = e.stage();
    failure = e.what();
    finish();
    throw;
  }
  finish();
  return result;
}

void SweepSpec::validate() const {
  if (replicates < 1) throw ConfigError("sweep.replicates must be >= 1");
  if (threads < 1) throw ConfigError("sweep.threads must be >= 1");
  for (Index v : n)
    if (v < 1) throw ConfigError("sweep.n entries must be >= 1");
  for (Index v : n0)
    if (v < 1) throw ConfigError("sweep.n0 entries must be >= 1");
  for (double v : snr)
    if (!(v > 0.0)) throw ConfigError("sweep.snr entries must be > 0");
  for (double v : q)
    if (!(v > 2.0)) throw ConfigError("sweep.q entries must be > 2");
  if (n.empty() && n0.empty() && snr.empty() && q.empty() && seed.empty())
    throw ConfigError("sweep grid is empty");
}

SweepSpec parse_sweep_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("sweep spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("sweep spec must be an object");
  SweepSpec spec;
  for (const auto& [key, v] : doc.items()) {
    try {
      if (key == "n") spec.n = v.get<std::vector<Index>>();
      else if (key == "n0") spec.n0 = v.get<std::vector<Index>>();
      else if (key == "snr") spec.snr = v.get<std::vector<double>>();
      else if (key == "q") spec.q = v.get<std::vector<double>>();
      else if (key == "seed") spec.seed = v.get<std::vector<std::uint64_t>>();
      else if (key == "replicates") spec.replicates = v.get<Index>();
      else if (key == "threads") spec.threads = v.get<unsigned>();
      else if (key == "write_cells") spec.write_cells = v.get<bool>();
      else throw ConfigError("unknown sweep key " + key);
    } catch (const json::exception& e) {
      throw ConfigError("sweep." + key + ": " + e.what());
    }
  }
  spec.validate();
  return spec;
}

std::uint64_t sweep_seed(std::uint64_t seed, Index cell, Index replicate) {
  return derive_seed(seed, {static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(replicate)});
}

std::vector<ExperimentConfig> sweep_cells(const SweepSpec& spec, const ExperimentConfig& base) {
  spec.validate();
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  const double noise_scale =
      base.data.sigma_p * std::sqrt(static_cast<double>(base.data.kind == DataKind::kMnist
                                                            ? kMnistSide * kMnistSide
                                                            : base.data.d));
  std::vector<ExperimentConfig> cells;
  Index cell = 0;
  for (Index n : axis(spec.n, base.n))
    for (Index n0 : axis(spec.n0, base.n0))
      for (double s : axis(spec.snr, std::numeric_limits<double>::quiet_NaN()))
        for (double q : axis(spec.q, base.finetune.q))
          for (std::uint64_t seed : axis(spec.seed, base.seed)) {
            for (Index rep = 0; rep < spec.replicates; ++rep) {
              ExperimentConfig c = base;
              c.n = n;
              c.n0 = n0;
              c.finetune.q = q;
              if (!std::isnan(s)) {
                if (base.data.kind == DataKind::kMnist)
                  c.data.target_norm = s * noise_scale;
                else
                  c.data.mu_norm = s * noise_scale;
              }
              c.seed = sweep_seed(seed, cell, rep);
              std::ostringstream dir;
              dir << base.output_dir << "/cell_" << cell << "_rep_" << rep;
              c.output_dir = dir.str();
              cells.push_back(std::move(c));
            }
            ++cell;
          }
  return cells;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const ExperimentConfig& base,
                                const ExperimentOptions& options) {
  const std::vector<ExperimentConfig> cells = sweep_cells(spec, base);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  ExperimentOptions cell_options = options;
  cell_options.write_outputs = spec.write_cells && options.write_outputs;
  cell_options.log = nullptr;

  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      const ExperimentConfig& c = cells[k];
      SweepRow& row = rows[k];
      row.cell = static_cast<Index>(k) / spec.replicates;
      row.replicate = static_cast<Index>(k) % spec.replicates;
      row.n = c.n;
      row.n0 = c.n0;
      row.q = c.finetune.q;
      row.seed = c.seed;
      try {
        const ExperimentResult r = run_experiment(c, cell_options);
        row.snr = r.snr;
        row.n_snr_q = static_cast<double>(c.n) * std::pow(r.snr, c.finetune.q);
        row.n0_snr2 = static_cast<double>(c.n0) * r.snr * r.snr;
        if (r.spectral) {
          row.mu_alignment = r.spectral->mu_alignment;
          if (r.spectral->eigenvalues.size() > 1)
            row.eigen_ratio = r.spectral->eigenvalues(1) / r.spectral->eigenvalues(0);
        }
        row.simclr = r.simclr;
        row.baseline = r.baseline;
      } catch (const std::exception& e) {
        row.status = "error";
        row.error = e.what();
      }
      if (options.log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        options.log("sweep row " + std::to_string(k + 1) + "/" + std::to_string(cells.size()) +
                    " " + row.status);
      }
    }
  };

  const unsigned threads = std::min<unsigned>(spec.threads, static_cast<unsigned>(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  auto pipeline = [](std::ostream& o, const std::optional<PipelineSummary>& p) {
    if (p)
      o << io::format_double(p->train_loss) << ',' << io::format_double(p->test_loss) << ','
        << io::format_double(p->test_error);
    else
      o << ",,";
  };
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << r.cell << ',' << r.replicate << ',' << r.n << ',' << r.n0 << ','
        << io::format_double(r.snr) << ',' << io::format_double(r.q) << ',' << r.seed << ','
        << io::format_double(r.n_snr_q) << ',' << io::format_double(r.n0_snr2) << ','
        << io::format_double(r.mu_alignment) << ',' << io::format_double(r.eigen_ratio) << ',';
    pipeline(out, r.simclr);
    out << ',';
    pipeline(out, r.baseline);
    out << ',' << r.status << ',' << field(r.error) << '\n';
  }
}

}  // namespace contrastlab
