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

#include "contrastlab/data_model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "contrastlab/io.hpp"

namespace contrastlab {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kMatrixVersion = 2;
}  // namespace

DataModelParams::DataModelParams(Vector mu, double sigma_p)
    : mu_(std::move(mu)), sigma_p_(sigma_p) {
  if (mu_.size() < 2) throw ConfigError("data model needs d >= 2");
  if (!(sigma_p_ >= 0.0) || !std::isfinite(sigma_p_))
    throw ConfigError("sigma_p must be finite and nonnegative");
  mu_norm_sq_ = mu_.squaredNorm();
  mu_norm_ = std::sqrt(mu_norm_sq_);
  if (!(mu_norm_ > 0.0) || !std::isfinite(mu_norm_))
    throw ConfigError("signal vector must have positive finite norm");
}

DataModelParams synthetic_params(Index d, double sigma_p, double mu_norm) {
  if (d < 2) throw ConfigError("data model needs d >= 2");
  Vector mu = Vector::Zero(d);
  mu(0) = mu_norm;
  return DataModelParams(std::move(mu), sigma_p);
}

double snr(const DataModelParams& params) {
  if (params.sigma_p() == 0.0) throw Error("infinite SNR");
  return params.mu_norm() /
         (params.sigma_p() * std::sqrt(static_cast<double>(params.d())));
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kPretrainUnlabeled: return "pretrain_unlabeled";
    case DatasetKind::kFinetuneLabeled: return "finetune_labeled";
    case DatasetKind::kTest: return "test";
  }
  return "unknown";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "pretrain_unlabeled") return DatasetKind::kPretrainUnlabeled;
  if (s == "finetune_labeled") return DatasetKind::kFinetuneLabeled;
  if (s == "test") return DatasetKind::kTest;
  throw ConfigError("unknown dataset kind '" + s + "'");
}

Vector sample_noise(const DataModelParams& params, Rng& rng) {
  const Index d = params.d();
  if (params.sigma_p() == 0.0) return Vector::Zero(d);
  Vector g = rng.normal_vector(d);
  const Vector& mu = params.mu();
  g -= mu * (mu.dot(g) / params.mu_norm_sq());
  g *= params.sigma_p();
  return g;
}

SamplePair sample_datapoint(const DataModelParams& params, Rng& rng) {
  SamplePair s;
  s.label = rng.rademacher();
  s.signal_position = rng.rademacher() > 0 ? 1 : 2;
  Vector signal = static_cast<double>(s.label) * params.mu();
  Vector noise = sample_noise(params, rng);
  if (s.signal_position == 1) {
    s.patch1 = std::move(signal);
    s.patch2 = std::move(noise);
  } else {
    s.patch1 = std::move(noise);
    s.patch2 = std::move(signal);
  }
  return s;
}

SamplePair augment(const SamplePair& sample, const DataModelParams& params, Rng& rng) {
  SamplePair s;
  s.label = sample.label;
  s.signal_position = rng.rademacher() > 0 ? 1 : 2;
  Vector signal = static_cast<double>(s.label) * params.mu();
  Vector noise = sample_noise(params, rng);
  if (s.signal_position == 1) {
    s.patch1 = std::move(signal);
    s.patch2 = std::move(noise);
  } else {
    s.patch1 = std::move(noise);
    s.patch2 = std::move(signal);
  }
  return s;
}

Dataset make_dataset(const DataModelParams& params, Index n, DatasetKind kind,
                     std::uint64_t seed) {
  Dataset out;
  out.kind = kind;
  out.seed = seed;
  out.samples.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) out.samples.push_back(sample_datapoint(params, rng));
  return out;
}

Dataset augment_dataset(const Dataset& data, const DataModelParams& params,
                        std::uint64_t seed) {
  Dataset out;
  out.kind = data.kind;
  out.seed = seed;
  out.samples.reserve(data.samples.size());
  Rng rng(seed);
  for (const auto& s : data.samples) out.samples.push_back(augment(s, params, rng));
  return out;
}

Matrix patch_sums(const Dataset& data) {
  Matrix z(data.size(), data.d());
  for (Index i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[static_cast<std::size_t>(i)];
    z.row(i) = (s.patch1 + s.patch2).transpose();
  }
  return z;
}

Matrix patch_matrix(const Dataset& data, int position) {
  if (position != 1 && position != 2) throw Error("patch position must be 1 or 2");
  Matrix x(data.size(), data.d());
  for (Index i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[static_cast<std::size_t>(i)];
    x.row(i) = (position == 1 ? s.patch1 : s.patch2).transpose();
  }
  return x;
}

Matrix noise_matrix(const Dataset& data) {
  Matrix x(data.size(), data.d());
  for (Index i = 0; i < data.size(); ++i)
    x.row(i) = data.samples[static_cast<std::size_t>(i)].noise_patch().transpose();
  return x;
}

Vector diagnostic_labels(const Dataset& data) {
  Vector y(data.size());
  for (Index i = 0; i < data.size(); ++i)
    y(i) = data.samples[static_cast<std::size_t>(i)].label;
  return y;
}

Vector labels(const Dataset& data) {
  if (data.kind == DatasetKind::kPretrainUnlabeled)
    throw Error("labels of pretrain_unlabeled data are hidden");
  return diagnostic_labels(data);
}

ConcentrationReport check_noise_concentration(const Dataset& data,
                                              const DataModelParams& params,
                                              double delta, const Dataset* other) {
  ConcentrationReport rep;
  const double s2 = params.sigma_p() * params.sigma_p();
  const double d = static_cast<double>(params.d());
  const double n = static_cast<double>(data.size());
  rep.norm_lower = 0.5 * s2 * d;
  rep.norm_upper = 1.5 * s2 * d;
  rep.inner_bound = 2.0 * s2 * std::sqrt(d * std::log(4.0 * n * n / delta));
  if (data.size() == 0) return rep;

  const Matrix xi = noise_matrix(data);
  const Vector norms = xi.rowwise().squaredNorm();
  rep.min_norm_sq = norms.minCoeff();
  rep.max_norm_sq = norms.maxCoeff();
  rep.norms_ok = rep.min_norm_sq >= rep.norm_lower && rep.max_norm_sq <= rep.norm_upper;

  if (other != nullptr) {
    if (other->size() != data.size()) throw Error("paired datasets differ in size");
    const Matrix xi2 = noise_matrix(*other);
    rep.max_abs_inner = (xi.array() * xi2.array()).rowwise().sum().abs().maxCoeff();
  } else if (data.size() > 1) {
    Matrix g = xi * xi.transpose();
    g.diagonal().setZero();
    rep.max_abs_inner = g.cwiseAbs().maxCoeff();
  }
  rep.inner_ok = rep.max_abs_inner <= rep.inner_bound;

  std::ostringstream msg;
  if (!rep.norms_ok) {
    msg << "noise norm^2 outside [" << rep.norm_lower << ", " << rep.norm_upper
        << "]: observed [" << rep.min_norm_sq << ", " << rep.max_norm_sq << "]";
    rep.warnings.push_back(msg.str());
    msg.str("");
  }
  if (!rep.inner_ok) {
    msg << "noise inner product " << rep.max_abs_inner << " exceeds bound "
        << rep.inner_bound;
    rep.warnings.push_back(msg.str());
  }
  return rep;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const Index d = data.d();
  out << "label,signal_position";
  for (Index k = 1; k <= d; ++k) out << ",x1_" << k;
  for (Index k = 1; k <= d; ++k) out << ",x2_" << k;
  out << '\n';
  for (const auto& s : data.samples) {
    out << s.label << ',' << s.signal_position;
    for (Index k = 0; k < d; ++k) out << ',' << io::format_double(s.patch1(k));
    for (Index k = 0; k < d; ++k) out << ',' << io::format_double(s.patch2(k));
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in, DatasetKind kind, std::uint64_t seed) {
  Dataset data;
  data.kind = kind;
  data.seed = seed;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty dataset CSV");
  const auto header = io::split_csv_line(line);
  if (header.size() < 4 || (header.size() - 2) % 2 != 0 || header[0] != "label" ||
      header[1] != "signal_position")
    throw FormatError("bad dataset CSV header");
  const Index d = static_cast<Index>((header.size() - 2) / 2);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() != header.size()) throw FormatError("ragged dataset CSV row");
    SamplePair s;
    s.label = static_cast<int>(io::parse_double(cells[0]));
    s.signal_position = static_cast<int>(io::parse_double(cells[1]));
    if ((s.label != 1 && s.label != -1) || (s.signal_position != 1 && s.signal_position != 2))
      throw FormatError("bad label or signal position in dataset CSV");
    s.patch1.resize(d);
    s.patch2.resize(d);
    for (Index k = 0; k < d; ++k) {
      s.patch1(k) = io::parse_double(cells[static_cast<std::size_t>(2 + k)]);
      s.patch2(k) = io::parse_double(cells[static_cast<std::size_t>(2 + d + k)]);
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

void write_dataset_binary(std::ostream& out, const Dataset& data) {
  io::write_magic(out, "SNDM");
  io::write_u32(out, kDatasetVersion);
  io::write_u32(out, static_cast<std::uint32_t>(data.d()));
  io::write_u32(out, static_cast<std::uint32_t>(data.size()));
  for (const auto& s : data.samples) {
    io::write_f64(out, s.label);
    io::write_f64(out, s.signal_position);
    for (Index k = 0; k < s.patch1.size(); ++k) io::write_f64(out, s.patch1(k));
    for (Index k = 0; k < s.patch2.size(); ++k) io::write_f64(out, s.patch2(k));
  }
}

Dataset read_dataset_binary(std::istream& in, DatasetKind kind, std::uint64_t seed) {
  io::expect_magic(in, "SNDM");
  if (io::read_u32(in) != kDatasetVersion) throw FormatError("unsupported SNDM version");
  const Index d = io::read_u32(in);
  const Index n = io::read_u32(in);
  Dataset data;
  data.kind = kind;
  data.seed = seed;
  data.samples.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    SamplePair s;
    s.label = static_cast<int>(io::read_f64(in));
    s.signal_position = static_cast<int>(io::read_f64(in));
    s.patch1.resize(d);
    s.patch2.resize(d);
    for (Index k = 0; k < d; ++k) s.patch1(k) = io::read_f64(in);
    for (Index k = 0; k < d; ++k) s.patch2(k) = io::read_f64(in);
    data.samples.push_back(std::move(s));
  }
  return data;
}

void write_matrix_binary(std::ostream& out, const Matrix& m) {
  io::write_magic(out, "SNDM");
  io::write_u32(out, kMatrixVersion);
  io::write_u32(out, static_cast<std::uint32_t>(m.cols()));
  io::write_u32(out, static_cast<std::uint32_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) io::write_f64(out, m(r, c));
}

Matrix read_matrix_binary(std::istream& in) {
  io::expect_magic(in, "SNDM");
  if (io::read_u32(in) != kMatrixVersion) throw FormatError("SNDM file is not a matrix");
  const Index cols = io::read_u32(in);
  const Index rows = io::read_u32(in);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = io::read_f64(in);
  return m;
}

}  // namespace contrastlab
