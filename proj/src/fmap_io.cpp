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

#include <fstream>
#include <limits>

#include "deformfuse/binary_io.hpp"
#include "deformfuse/tensor.hpp"

namespace deformfuse {

void write_fmap(std::ostream& os, const FeatureMap& map) {
  binio::put_magic(os, "FMAP");
  binio::put_u32(os, static_cast<std::uint32_t>(map.height()));
  binio::put_u32(os, static_cast<std::uint32_t>(map.width()));
  binio::put_u32(os, static_cast<std::uint32_t>(map.channels()));
  for (double v : map.data()) binio::put_f64(os, v);
  if (!os) throw FormatError("FMAP: write failed");
}

FeatureMap read_fmap(std::istream& is) {
  binio::expect_magic(is, "FMAP");
  const auto h = binio::get_u32(is);
  const auto w = binio::get_u32(is);
  const auto d = binio::get_u32(is);
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<int>::max());
  if (h > kMax || w > kMax || d > kMax || static_cast<std::uint64_t>(h) * w * d > (1ull << 32)) {
    throw FormatError("FMAP: implausible dimensions");
  }
  std::vector<double> data(static_cast<std::size_t>(h) * w * d);
  for (auto& v : data) v = binio::get_f64(is);
  try {
    return FeatureMap(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d), std::move(data));
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("FMAP: ") + e.what());
  }
}

void save_fmap(const std::string& path, const FeatureMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_fmap(os, map);
}

FeatureMap load_fmap(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_fmap(is);
}

}  // namespace deformfuse
