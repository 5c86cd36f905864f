// Copyright 2026 The deformfuse Authors
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

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "deformfuse/binary_io.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

void write_pcld(std::ostream& os, const PointCloud& cloud) {
  binio::put_magic(os, "PCLD");
  binio::put_u32(os, static_cast<std::uint32_t>(cloud.size()));
  binio::put_u32(os, static_cast<std::uint32_t>(cloud.extra_channels()));
  for (double v : cloud.rows()) binio::put_f64(os, v);
  if (!os) throw FormatError("PCLD: write failed");
}

PointCloud read_pcld(std::istream& is) {
  binio::expect_magic(is, "PCLD");
  const auto count = binio::get_u32(is);
  const auto extras = binio::get_u32(is);
  if (extras > 1024) throw FormatError("PCLD: implausible channel count");
  PointCloud cloud(static_cast<int>(extras));
  cloud.reserve(count);
  std::vector<double> row(3 + extras);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (auto& v : row) v = binio::get_f64(is);
    try {
      cloud.push_back(row);
    } catch (const InvalidInput& e) {
      throw FormatError(std::string("PCLD: ") + e.what());
    }
  }
  return cloud;
}

void save_pcld(const std::string& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_pcld(os, cloud);
}

PointCloud load_pcld(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_pcld(is);
}

void write_points_csv(std::ostream& os, const PointCloud& cloud) {
  os << "x,y,z";
  for (int e = 0; e < cloud.extra_channels(); ++e) {
    if (e == 0) {
      os << ",intensity";
    } else {
      os << ",f" << e;
    }
  }
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << p[k];
    os << '\n';
  }
}

PointCloud read_points_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw FormatError("points CSV: missing header");
  const int columns = static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
  if (columns < 3 || header.rfind("x,y,z", 0) != 0) throw FormatError("points CSV: header must start with x,y,z");
  PointCloud cloud(columns - 3);
  std::vector<double> row(columns);
  std::string line;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int k = 0;
    while (std::getline(ls, cell, ',')) {
      if (k >= columns) throw FormatError("points CSV: too many columns on line " + std::to_string(line_no));
      try {
        std::size_t used = 0;
        row[k] = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw FormatError("points CSV: bad number on line " + std::to_string(line_no));
      }
      ++k;
    }
    if (k != columns) throw FormatError("points CSV: too few columns on line " + std::to_string(line_no));
    try {
      cloud.push_back(row);
    } catch (const InvalidInput& e) {
      throw FormatError(std::string("points CSV: ") + e.what());
    }
  }
  return cloud;
}

}  // namespace deformfuse
