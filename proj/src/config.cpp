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

#include "contrastlab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "contrastlab/io.hpp"
#include "contrastlab/mnist.hpp"

namespace contrastlab {

namespace {

using json = nlohmann::ordered_json;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      (void)value;
      if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  Section sub(const std::string& key) { return Section(at(key), where(key)); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(obj_.at(key), key);
  }

  // Assigns `out` unless the value is the string "auto", in which case the
  // auto flag is raised.
  template <typename T>
  void get_auto(const std::string& key, T& out, bool& automatic) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_string() && v.get<std::string>() == "auto") {
      automatic = true;
      return;
    }
    out = convert<T>(v, key);
    automatic = false;
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where(key) + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
      return v.get<T>();
    } else {
      if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      const auto i = v.get<std::int64_t>();
      if constexpr (std::is_unsigned_v<T>) {
        if (i < 0) throw ConfigError(where(key) + " must be non-negative");
      }
      return static_cast<T>(i);
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json auto_or(bool automatic, double value) {
  return automatic ? json("auto") : json(value);
}

json auto_or(bool automatic, Index value) {
  return automatic ? json("auto") : json(value);
}

}  // namespace

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kSimclrFinetune: return "simclr_finetune";
    case Pipeline::kBaseline: return "baseline";
    case Pipeline::kBoth: return "both";
  }
  return "both";
}

Pipeline pipeline_from_string(const std::string& s) {
  if (s == "simclr_finetune") return Pipeline::kSimclrFinetune;
  if (s == "baseline") return Pipeline::kBaseline;
  if (s == "both") return Pipeline::kBoth;
  throw ConfigError("unknown pipeline '" + s + "'");
}

std::string to_string(TrackMode t) {
  switch (t) {
    case TrackMode::kOff: return "off";
    case TrackMode::kRecurrence: return "recurrence";
    case TrackMode::kBoth: return "both";
  }
  return "both";
}

TrackMode track_mode_from_string(const std::string& s) {
  if (s == "off") return TrackMode::kOff;
  if (s == "recurrence") return TrackMode::kRecurrence;
  if (s == "both") return TrackMode::kBoth;
  throw ConfigError("unknown track mode '" + s + "'");
}

void ExperimentConfig::resolve() {
  if (data.kind == DataKind::kSynthetic) {
    if (data.d < 1) throw ConfigError("data.d must be >= 1");
    if (!(data.mu_norm > 0.0)) throw ConfigError("data.mu_norm must be > 0");
  } else {
    if (data.images_path.empty() || data.labels_path.empty())
      throw ConfigError("data.images and data.labels are required for mnist");
    if (data.digit_class < 0 || data.digit_class > 9)
      throw ConfigError("data.digit_class must be in 0..9");
    if (data.sample_index < 0) throw ConfigError("data.sample_index must be >= 0");
    if (data.target_norm && !(*data.target_norm > 0.0))
      throw ConfigError("data.target_norm must be > 0");
    data.d = kMnistSide * kMnistSide;
  }
  if (!(data.sigma_p >= 0.0)) throw ConfigError("data.sigma_p must be >= 0");
  if (n0 < 1) throw ConfigError("n0 must be >= 1");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (test_size < 1) throw ConfigError("test_size must be >= 1");
  if (!(M > 0.0)) throw ConfigError("theorem.M must be > 0");
  if (spectral_k < 1) throw ConfigError("spectral_k must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
  if (baseline_sigma0 && !(*baseline_sigma0 >= 0.0))
    throw ConfigError("baseline.sigma0 must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
  finetune.m = pretrain.m;
  finetune.test_size = test_size;
  pretrain.seed = seed;
  finetune.seed = seed;
  pretrain.validate();
  finetune.validate();
}

ExperimentConfig default_synthetic_config() {
  ExperimentConfig c;
  c.finetune.t_star_cap = kExperimentStepCap;
  c.resolve();
  return c;
}

ExperimentConfig default_mnist_config(const std::string& images_path,
                                      const std::string& labels_path) {
  ExperimentConfig c;
  c.finetune.t_star_cap = kExperimentStepCap;
  c.data.kind = DataKind::kMnist;
  c.data.images_path = images_path;
  c.data.labels_path = labels_path;
  c.data.sigma_p = 200.0;
  c.data.digit_class = 0;
  c.data.sample_index = 0;
  c.data.target_norm = 1400.0;
  c.n0 = 200;
  c.n = 40;
  c.pretrain.m = 16;
  c.pretrain.sigma0 = 7e-7;
  if (!images_path.empty()) c.resolve();
  return c;
}

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = base;
  // A document that switches to MNIST starts from the pinned MNIST defaults.
  if (base.data.kind != DataKind::kMnist && doc.is_object() && doc.contains("data") &&
      doc["data"].is_object() && doc["data"].value("kind", "") == "mnist")
    c = default_mnist_config("", "");
  {
    Section root(doc, "");
    if (root.has("data")) {
      Section s = root.sub("data");
      if (s.has("kind")) {
        const json& k = s.at("kind");
        const std::string kind = k.is_string() ? k.get<std::string>() : "";
        if (kind == "synthetic")
          c.data.kind = DataKind::kSynthetic;
        else if (kind == "mnist")
          c.data.kind = DataKind::kMnist;
        else
          throw ConfigError("data.kind must be 'synthetic' or 'mnist'");
      }
      s.get("d", c.data.d);
      s.get("sigma_p", c.data.sigma_p);
      s.get("mu_norm", c.data.mu_norm);
      s.get("images", c.data.images_path);
      s.get("labels", c.data.labels_path);
      s.get("digit_class", c.data.digit_class);
      s.get("sample_index", c.data.sample_index);
      if (s.has("target_norm")) {
        const json& v = s.at("target_norm");
        if (v.is_null()) {
          c.data.target_norm.reset();
        } else if (v.is_number()) {
          c.data.target_norm = v.get<double>();
        } else {
          throw ConfigError("data.target_norm must be a number or null");
        }
      }
    }
    root.get("n0", c.n0);
    root.get("n", c.n);
    root.get("test_size", c.test_size);
    root.get("m", c.pretrain.m);
    if (root.has("pretrain")) {
      Section s = root.sub("pretrain");
      s.get("tau", c.pretrain.tau);
      s.get_auto("eta", c.pretrain.eta, c.pretrain_auto_eta);
      s.get("sigma0", c.pretrain.sigma0);
      s.get_auto("iterations", c.pretrain.iterations, c.pretrain_auto_iterations);
    }
    if (root.has("finetune")) {
      Section s = root.sub("finetune");
      s.get("q", c.finetune.q);
      s.get_auto("eta", c.finetune.eta, c.finetune_auto_eta);
      s.get_auto("iterations", c.finetune.iterations, c.finetune_auto_iterations);
      s.get("t_star_cap", c.finetune.t_star_cap);
      s.get("epsilon_target", c.finetune.epsilon_target);
      s.get("eval_every", c.finetune.eval_every);
      s.get("stop_at_target", c.stop_at_target);
      if (s.has("track")) {
        if (!s.at("track").is_string()) throw ConfigError("finetune.track must be a string");
        c.finetune.track = track_mode_from_string(s.at("track").get<std::string>());
      }
      s.get("track_tolerance", c.finetune.track_tolerance);
    }
    if (root.has("baseline")) {
      Section s = root.sub("baseline");
      if (s.has("sigma0")) {
        const json& v = s.at("sigma0");
        if (v.is_null()) {
          c.baseline_sigma0.reset();
        } else if (v.is_number()) {
          c.baseline_sigma0 = v.get<double>();
        } else {
          throw ConfigError("baseline.sigma0 must be a number or null");
        }
      }
    }
    if (root.has("pipeline")) {
      if (!root.at("pipeline").is_string()) throw ConfigError("pipeline must be a string");
      c.pipeline = pipeline_from_string(root.at("pipeline").get<std::string>());
    }
    if (root.has("analyses")) {
      Section s = root.sub("analyses");
      s.get("spectral", c.analyses.spectral);
      s.get("decomposition", c.analyses.decomposition);
      s.get("coefficient_track", c.analyses.coefficient_track);
    }
    if (root.has("theorem")) {
      Section s = root.sub("theorem");
      s.get("M", c.M);
    }
    root.get("spectral_k", c.spectral_k);
    root.get("output_dir", c.output_dir);
    root.get("seed", c.seed);
    root.get("delta", c.delta);
    root.get("label", c.label);
  }
  c.resolve();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string config_to_json(const ExperimentConfig& c) {
  json doc;
  json data;
  if (c.data.kind == DataKind::kSynthetic) {
    data["kind"] = "synthetic";
    data["d"] = c.data.d;
    data["sigma_p"] = c.data.sigma_p;
    data["mu_norm"] = c.data.mu_norm;
  } else {
    data["kind"] = "mnist";
    data["images"] = c.data.images_path;
    data["labels"] = c.data.labels_path;
    data["digit_class"] = c.data.digit_class;
    data["sample_index"] = c.data.sample_index;
    data["target_norm"] = c.data.target_norm ? json(*c.data.target_norm) : json(nullptr);
    data["sigma_p"] = c.data.sigma_p;
  }
  doc["label"] = c.label;
  doc["data"] = data;
  doc["n0"] = c.n0;
  doc["n"] = c.n;
  doc["test_size"] = c.test_size;
  doc["m"] = c.pretrain.m;
  doc["pretrain"] = {{"tau", c.pretrain.tau},
                     {"eta", auto_or(c.pretrain_auto_eta, c.pretrain.eta)},
                     {"sigma0", c.pretrain.sigma0},
                     {"iterations", auto_or(c.pretrain_auto_iterations, c.pretrain.iterations)}};
  doc["finetune"] = {{"q", c.finetune.q},
                     {"eta", auto_or(c.finetune_auto_eta, c.finetune.eta)},
                     {"iterations", auto_or(c.finetune_auto_iterations, c.finetune.iterations)},
                     {"t_star_cap", c.finetune.t_star_cap},
                     {"epsilon_target", c.finetune.epsilon_target},
                     {"eval_every", c.finetune.eval_every},
                     {"stop_at_target", c.stop_at_target},
                     {"track", to_string(c.finetune.track)},
                     {"track_tolerance", c.finetune.track_tolerance}};
  doc["baseline"] = {{"sigma0", c.baseline_sigma0 ? json(*c.baseline_sigma0) : json(nullptr)}};
  doc["pipeline"] = to_string(c.pipeline);
  doc["analyses"] = {{"spectral", c.analyses.spectral},
                     {"decomposition", c.analyses.decomposition},
                     {"coefficient_track", c.analyses.coefficient_track}};
  doc["theorem"] = {{"M", c.M}};
  doc["spectral_k"] = c.spectral_k;
  doc["output_dir"] = c.output_dir;
  doc["seed"] = c.seed;
  doc["delta"] = c.delta;
  return doc.dump(2) + "\n";
}

DataModelParams make_data_params(const ExperimentConfig& config) {
  if (config.data.kind == DataKind::kSynthetic)
    return synthetic_params(config.data.d, config.data.sigma_p, config.data.mu_norm);
  const MnistSignal sig = load_mnist_signal(config.data.images_path, config.data.labels_path,
                                            config.data.digit_class, config.data.sample_index,
                                            config.data.target_norm);
  return DataModelParams(sig.mu, config.data.sigma_p);
}

void apply_data_defaults(ExperimentConfig& config, const DataModelParams& params) {
  if (config.pretrain_auto_eta) config.pretrain.eta = default_pretrain_eta(params);
  if (config.finetune_auto_eta) config.finetune.eta = kFinetuneEtaScale / params.mu_norm_sq();
}

std::vector<ConditionItem> evaluate_conditions(const ExperimentConfig& raw,
                                               const DataModelParams& params) {
  ExperimentConfig config = raw;
  apply_data_defaults(config, params);
  const double s = snr(params);
  const double q = config.finetune.q;
  const double d = static_cast<double>(params.d());
  const double n = static_cast<double>(config.n);
  const double n0 = static_cast<double>(config.n0);
  const double mu2 = params.mu_norm_sq();
  const double noise2 = params.sigma_p() * params.sigma_p() * d;
  const double e = 1.0 / (q - 2.0);
  std::vector<ConditionItem> items;
  auto add = [&](int item, std::string name, double measured, double bound, bool ok) {
    ConditionItem c;
    c.item = item;
    c.name = std::move(name);
    c.measured = measured;
    c.bound = bound;
    c.satisfied = ok;
    std::ostringstream msg;
    msg << "condition item " << item << " (" << c.name << ") " << (ok ? "holds" : "violated")
        << ": measured " << measured << ", bound " << bound;
    c.message = msg.str();
    items.push_back(std::move(c));
  };

  const double item1 = n0 * std::min(s * s, 1.0);
  add(1, "unlabeled sample size n0*min(snr^2,1) >= 1", item1, 1.0, item1 >= 1.0);
  add(2, "labeled sample size n >= 1", n, 1.0, n >= 1.0);
  const double d_bound = std::pow(n, -6.0 * e) * std::pow(s, -6.0 * q * e) *
                             std::max(1.0 / n0, 1.0 / (s * s)) +
                         std::pow(n0, 4.0);
  add(3, "dimension d", d, d_bound, d >= d_bound);
  const double m_bound = std::log(1.0 / config.delta);
  const double m = static_cast<double>(config.pretrain.m);
  add(4, "filter count m >= log(1/delta)", m, m_bound, m >= m_bound);
  const double sigma_bound =
      std::min(1.0, std::pow(n, 4.0 * e) * std::pow(s, 4.0 * q * e) / (d * mu2)) *
      std::min({1.0, 1.0 / s, 1.0 / (s * s)});
  add(5, "initialization scale sigma0", config.pretrain.sigma0, sigma_bound,
      config.pretrain.sigma0 <= sigma_bound);
  const double eta_bound = std::min(1.0 / noise2, 1.0 / mu2);
  add(6, "pre-training learning rate eta", config.pretrain.eta, eta_bound,
      config.pretrain.eta <= eta_bound);
  return items;
}

std::vector<std::string> check_condition41(const ExperimentConfig& config,
                                           const DataModelParams& params) {
  std::vector<std::string> warnings;
  for (const auto& item : evaluate_conditions(config, params))
    if (!item.satisfied) warnings.push_back(item.message);
  return warnings;
}

}  // namespace contrastlab
