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

#include "contrastlab/mnist.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace contrastlab {

namespace {

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated file");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

void read_bytes(std::istream& in, std::vector<std::uint8_t>& buf) {
  if (buf.empty()) return;
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError("truncated file");
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

IdxImages read_idx_images(std::istream& in) {
  if (read_be32(in) != kIdxImageMagic) throw FormatError("bad magic");
  IdxImages img;
  img.count = read_be32(in);
  img.rows = read_be32(in);
  img.cols = read_be32(in);
  if (img.rows != kMnistSide || img.cols != kMnistSide)
    throw FormatError("unexpected image dimensions");
  img.pixels.resize(std::size_t{img.count} * img.rows * img.cols);
  read_bytes(in, img.pixels);
  return img;
}

std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
  if (read_be32(in) != kIdxLabelMagic) throw FormatError("bad magic");
  std::vector<std::uint8_t> labels(read_be32(in));
  read_bytes(in, labels);
  return labels;
}

void write_idx_images(std::ostream& out, const IdxImages& images) {
  write_be32(out, kIdxImageMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(std::ostream& out, const std::vector<std::uint8_t>& labels) {
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

MnistSignal load_mnist_signal(std::istream& images, std::istream& labels, int digit_class,
                              Index sample_index, std::optional<double> target_norm) {
  if (digit_class < 0 || digit_class > 9) throw Error("digit class out of range");
  if (sample_index < 0) throw Error("sample index out of range");
  if (target_norm && !(*target_norm > 0.0)) throw ConfigError("target_norm must be > 0");
  const IdxImages img = read_idx_images(images);
  const std::vector<std::uint8_t> lab = read_idx_labels(labels);
  if (lab.size() != img.count) throw FormatError("image and label counts differ");

  MnistSignal sig;
  sig.digit_class = digit_class;
  sig.sample_index = sample_index;
  sig.target_norm = target_norm;
  Index seen = 0;
  for (std::size_t k = 0; k < lab.size(); ++k) {
    if (lab[k] != digit_class) continue;
    if (seen++ < sample_index) continue;
    const std::size_t area = std::size_t{img.rows} * img.cols;
    sig.image_index = static_cast<Index>(k);
    sig.mu.resize(static_cast<Index>(area));
    for (std::size_t p = 0; p < area; ++p)
      sig.mu(static_cast<Index>(p)) = img.pixels[k * area + p] / 255.0;
    sig.raw_norm = sig.mu.norm();
    if (target_norm) {
      if (!(sig.raw_norm > 0.0)) throw Error("selected image is blank");
      sig.mu *= *target_norm / sig.raw_norm;
    }
    return sig;
  }
  throw Error("sample index out of range for digit class " + std::to_string(digit_class));
}

MnistSignal load_mnist_signal(const std::string& images_path, const std::string& labels_path,
                              int digit_class, Index sample_index,
                              std::optional<double> target_norm) {
  std::ifstream images = open_binary(images_path);
  std::ifstream labels = open_binary(labels_path);
  MnistSignal sig = load_mnist_signal(images, labels, digit_class, sample_index, target_norm);
  sig.images_path = images_path;
  sig.labels_path = labels_path;
  return sig;
}

}  // namespace contrastlab
