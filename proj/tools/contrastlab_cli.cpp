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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "contrastlab/config.hpp"
#include "contrastlab/experiment.hpp"
#include "contrastlab/io.hpp"

namespace {

using namespace contrastlab;

constexpr int kExitOk = 0;
constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "experiment seed");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_flag("--quiet", flags.quiet, "suppress progress messages");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig c =
      flags.config_path.empty() ? default_synthetic_config() : load_config(flags.config_path);
  if (flags.seed) c.seed = *flags.seed;
  if (!flags.out_dir.empty()) c.output_dir = flags.out_dir;
  c.resolve();
  return c;
}

ExperimentOptions make_options(const CommonFlags& flags, StopAfter stop) {
  ExperimentOptions o;
  o.stop_after = stop;
  if (!flags.quiet) o.log = [](const std::string& m) { std::cerr << "[contrastlab] " << m << '\n'; };
  return o;
}

void print_summary(const ExperimentResult& r) {
  std::cout << "output_dir " << r.config.output_dir << '\n';
  std::cout << "snr " << io::format_double(r.snr) << '\n';
  if (r.spectral) {
    std::cout << "lambda1 " << io::format_double(r.spectral->eigenvalues(0)) << '\n';
    std::cout << "mu_alignment " << io::format_double(r.spectral->mu_alignment) << '\n';
    std::cout << "T_simclr " << r.T_simclr << '\n';
  }
  if (r.theorem53) std::cout << "gamma0 " << io::format_double(r.gamma0) << '\n';
  for (const auto* p : {&r.simclr, &r.baseline}) {
    if (!*p) continue;
    const PipelineSummary& s = **p;
    std::cout << s.pipeline << " step=" << s.final_step
              << " train_loss=" << io::format_double(s.train_loss)
              << " test_loss=" << io::format_double(s.test_loss)
              << " test_error=" << io::format_double(s.test_error) << '\n';
  }
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

int run_stage(const CommonFlags& flags, StopAfter stop, std::optional<Pipeline> pipeline) {
  ExperimentConfig c = resolve_config(flags);
  if (pipeline) c.pipeline = *pipeline;
  print_summary(run_experiment(c, make_options(flags, stop)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastlab: contrastive pre-training and fine-tuning experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string sweep_path;

  struct Command {
    const char* name;
    const char* help;
    StopAfter stop;
    std::optional<Pipeline> pipeline;
  };
  const Command commands[] = {
      {"pretrain", "generate data and run contrastive pre-training", StopAfter::kPretrain,
       Pipeline::kSimclrFinetune},
      {"spectral", "eigen-analysis of the contrast kernel", StopAfter::kSpectral,
       Pipeline::kSimclrFinetune},
      {"decompose", "pre-train and decompose the filters", StopAfter::kDecompose,
       Pipeline::kSimclrFinetune},
      {"finetune", "pre-train, split and fine-tune", StopAfter::kFinetune,
       Pipeline::kSimclrFinetune},
      {"baseline", "direct supervised training from Gaussian init", StopAfter::kAll,
       Pipeline::kBaseline},
      {"run", "full pipeline as configured", StopAfter::kAll, std::nullopt},
  };
  std::vector<std::pair<CLI::App*, const Command*>> stage_cmds;
  for (const Command& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    add_common(cmd, flags);
    stage_cmds.push_back({cmd, &c});
  }
  CLI::App* sweep = app.add_subcommand("sweep", "grid of experiments, one CSV row per replicate");
  add_common(sweep, flags);
  sweep->add_option("--spec", sweep_path, "JSON sweep spec")->required()->check(CLI::ExistingFile);
  CLI::App* check = app.add_subcommand("check-conditions", "evaluate the standing assumptions");
  add_common(check, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [cmd, c] : stage_cmds)
      if (cmd->parsed()) return run_stage(flags, c->stop, c->pipeline);

    if (sweep->parsed()) {
      const ExperimentConfig base = resolve_config(flags);
      const SweepSpec spec = parse_sweep_spec(io::read_file(sweep_path));
      const auto rows = run_sweep(spec, base, make_options(flags, StopAfter::kAll));
      io::ensure_directory(base.output_dir);
      std::ofstream out(base.output_dir + "/sweep.csv");
      write_sweep_csv(out, rows);
      write_sweep_csv(std::cout, rows);
      return kExitOk;
    }

    if (check->parsed()) {
      const ExperimentConfig c = resolve_config(flags);
      const DataModelParams params = make_data_params(c);
      for (const auto& item : evaluate_conditions(c, params))
        (item.satisfied ? std::cout : std::cerr)
            << (item.satisfied ? "ok: " : "warning: ") << item.message << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return kExitOk;
}
