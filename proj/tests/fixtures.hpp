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

#ifndef CONTRASTLAB_TESTS_FIXTURES_HPP_
#define CONTRASTLAB_TESTS_FIXTURES_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "contrastlab/mnist.hpp"

namespace fixture {

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("contrastlab_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct IdxPair {
  std::string images;
  std::string labels;
};

// Procedural 28x28 "digits": image k has label k % 10 and a ring whose radius
// depends on the label, shifted by a per-image offset.
inline IdxPair write_mnist_fixture(const TempDir& dir, std::uint32_t count = 60) {
  contrastlab::IdxImages img;
  img.count = count;
  img.rows = 28;
  img.cols = 28;
  img.pixels.resize(std::size_t{count} * 784);
  std::vector<std::uint8_t> labels(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    labels[k] = static_cast<std::uint8_t>(k % 10);
    const double radius = 4.0 + labels[k];
    const double cx = 13.5 + static_cast<double>(k % 3) - 1.0;
    const double cy = 13.5 + static_cast<double>((k / 3) % 3) - 1.0;
    for (int r = 0; r < 28; ++r)
      for (int c = 0; c < 28; ++c) {
        const double dist = std::hypot(r - cy, c - cx);
        const double v = std::max(0.0, 1.0 - std::abs(dist - radius) / 1.5);
        img.pixels[std::size_t{k} * 784 + static_cast<std::size_t>(r * 28 + c)] =
            static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
  }
  IdxPair out{dir.file("images-idx3-ubyte"), dir.file("labels-idx1-ubyte")};
  std::ofstream im(out.images, std::ios::binary);
  contrastlab::write_idx_images(im, img);
  std::ofstream lb(out.labels, std::ios::binary);
  contrastlab::write_idx_labels(lb, labels);
  return out;
}

}  // namespace fixture

#endif  // CONTRASTLAB_TESTS_FIXTURES_HPP_
