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

#ifndef CONTRASTLAB_MNIST_HPP_
#define CONTRASTLAB_MNIST_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "contrastlab/common.hpp"

namespace contrastlab {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr Index kMnistSide = 28;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

IdxImages read_idx_images(std::istream& in);
std::vector<std::uint8_t> read_idx_labels(std::istream& in);
void write_idx_images(std::ostream& out, const IdxImages& images);
void write_idx_labels(std::ostream& out, const std::vector<std::uint8_t>& labels);

struct MnistSignal {
  Vector mu;  // 784 entries
  std::string images_path;
  std::string labels_path;
  int digit_class = 0;
  Index sample_index = 0;
  Index image_index = 0;  // position in the file
  double raw_norm = 0.0;  // norm of the [0, 1] image
  std::optional<double> target_norm;
};

// sample_index-th image of digit_class, pixels mapped to [0, 1], optionally
// rescaled to target_norm.
MnistSignal load_mnist_signal(const std::string& images_path, const std::string& labels_path,
                              int digit_class, Index sample_index,
                              std::optional<double> target_norm = std::nullopt);
MnistSignal load_mnist_signal(std::istream& images, std::istream& labels, int digit_class,
                              Index sample_index, std::optional<double> target_norm = std::nullopt);

}  // namespace contrastlab

#endif  // CONTRASTLAB_MNIST_HPP_
