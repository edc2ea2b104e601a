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

#ifndef CONTRASTLAB_IO_HPP_
#define CONTRASTLAB_IO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "contrastlab/common.hpp"

namespace contrastlab::io {

// Shortest decimal form that round-trips a double exactly ("%.17g").
std::string format_double(double x);

// Parses a double written by format_double (also accepts inf/nan).
double parse_double(std::string_view s);

std::vector<std::string> split_csv_line(const std::string& line);

// Little-endian primitives. Independent of host byte order.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

// Reads/checks a 4-byte magic tag; throws FormatError("bad magic") on mismatch.
void write_magic(std::ostream& out, std::string_view magic);
void expect_magic(std::istream& in, std::string_view magic);

// Creates the directory (and parents) when missing.
void ensure_directory(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace contrastlab::io

#endif  // CONTRASTLAB_IO_HPP_
