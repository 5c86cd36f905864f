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

#include "deformfuse/binary_io.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"

namespace deformfuse {

namespace {

constexpr std::uint32_t kParamsVersion = 1;

void put_layer(std::ostream& os, const LinearLayer& layer) {
  binio::put_u32(os, static_cast<std::uint32_t>(layer.out));
  binio::put_u32(os, static_cast<std::uint32_t>(layer.in));
  for (double w : layer.weight) binio::put_f64(os, w);
  for (double b : layer.bias) binio::put_f64(os, b);
}

void get_layer(std::istream& is, LinearLayer& layer, const std::string& name) {
  const auto out = binio::get_u32(is);
  const auto in = binio::get_u32(is);
  if (static_cast<int>(out) != layer.out || static_cast<int>(in) != layer.in) {
    throw FormatError("DCFA: layer " + name + " has unexpected shape");
  }
  for (auto& w : layer.weight) w = binio::get_f64(is);
  for (auto& b : layer.bias) b = binio::get_f64(is);
}

}  // namespace

void write_params(std::ostream& os, const DeformCafaParams& params) {
  params.validate();
  const auto& cfg = params.config;
  binio::put_magic(os, "DCFA");
  binio::put_u32(os, kParamsVersion);
  for (int v : {cfg.heads, cfg.points, cfg.image_channels, cfg.voxel_channels, cfg.token_channels, cfg.head_channels}) {
    binio::put_u32(os, static_cast<std::uint32_t>(v));
  }
  binio::put_u32(os, params.voxel_adapter ? 1u : 0u);
  params.for_each_layer([&](const std::string&, const LinearLayer& layer) { put_layer(os, layer); });
  if (!os) throw FormatError("DCFA: write failed");
}

DeformCafaParams read_params(std::istream& is) {
  binio::expect_magic(is, "DCFA");
  const auto version = binio::get_u32(is);
  if (version != kParamsVersion) throw FormatError("DCFA: unsupported version " + std::to_string(version));
  DeformCafaConfig cfg;
  int* fields[] = {&cfg.heads, &cfg.points, &cfg.image_channels, &cfg.voxel_channels, &cfg.token_channels,
                   &cfg.head_channels};
  for (int* f : fields) {
    const auto v = binio::get_u32(is);
    if (v == 0 || v > 65536) throw FormatError("DCFA: implausible header field");
    *f = static_cast<int>(v);
  }
  const bool has_adapter = binio::get_u32(is) != 0;
  if (has_adapter != (cfg.voxel_channels != cfg.image_channels)) {
    throw FormatError("DCFA: adapter flag inconsistent with channel counts");
  }
  // Shapes come from the header; values are overwritten below.
  std::mt19937_64 unused(0);
  auto params = DeformCafaParams::initial(cfg, unused);
  params.for_each_layer([&](const std::string& name, LinearLayer& layer) { get_layer(is, layer, name); });
  try {
    params.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("DCFA: ") + e.what());
  }
  return params;
}

void save_params(const std::string& path, const DeformCafaParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_params(os, params);
}

DeformCafaParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_params(is);
}

void write_fused(std::ostream& os, const FusedVoxelSet& fused) {
  binio::put_magic(os, "FUSD");
  binio::put_u32(os, 1);
  binio::put_u32(os, static_cast<std::uint32_t>(fused.voxels.size()));
  binio::put_u32(os, static_cast<std::uint32_t>(fused.voxels.feature_width));
  for (std::size_t i = 0; i < fused.voxels.size(); ++i) {
    const Voxel& v = fused.voxels.voxels[i];
    for (int a = 0; a < 3; ++a) binio::put_i32(os, v.cell[a]);
    for (int a = 0; a < 3; ++a) binio::put_f64(os, v.center[a]);
    binio::put_u32(os, static_cast<std::uint32_t>(v.point_count));
    binio::put_i32(os, fused.source[i] ? *fused.source[i] : -1);
    for (double f : v.feature) binio::put_f64(os, f);
    for (double f : fused.fused[i]) binio::put_f64(os, f);
  }
  if (!os) throw FormatError("FUSD: write failed");
}

void save_fused(const std::string& path, const FusedVoxelSet& fused) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_fused(os, fused);
}

}  // namespace deformfuse
