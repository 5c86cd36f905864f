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

#include "deformfuse/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deformfuse/errors.hpp"

namespace deformfuse {

PointCloud::PointCloud(int extra_channels) : extra_channels_(extra_channels) {
  if (extra_channels < 0) throw InvalidInput("PointCloud: negative channel count");
}

void PointCloud::push_back(std::span<const double> row) {
  if (static_cast<int>(row.size()) != stride()) throw InvalidInput("PointCloud: row width mismatch");
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(row[i])) throw InvalidInput("PointCloud: non-finite coordinate");
  }
  rows_.insert(rows_.end(), row.begin(), row.end());
}

void PointCloud::append(const PointCloud& other) {
  if (other.extra_channels_ != extra_channels_) throw InvalidInput("PointCloud: channel mismatch on append");
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

void VoxelConfig::validate() const {
  if (!voxel_size.allFinite() || !range_min.allFinite() || !range_max.allFinite()) {
    throw InvalidInput("VoxelConfig: non-finite value");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(voxel_size[a] > 0.0)) throw InvalidInput("VoxelConfig: voxel size must be positive");
    if (!(range_max[a] > range_min[a])) throw InvalidInput("VoxelConfig: degenerate range");
    const double cells = (range_max[a] - range_min[a]) / voxel_size[a];
    if (std::abs(cells - std::round(cells)) > 1e-6 * std::max(1.0, cells)) {
      throw InvalidInput("VoxelConfig: range extent must be a whole number of voxels");
    }
    if (cells > 1e9) throw InvalidInput("VoxelConfig: grid too large");
  }
}

std::array<int, 3> VoxelConfig::grid_dims() const {
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::round((range_max[a] - range_min[a]) / voxel_size[a]));
  return dims;
}

VoxelSet voxelize(const PointCloud& cloud, const VoxelConfig& cfg) {
  cfg.validate();
  const auto dims = cfg.grid_dims();
  const int extras = cloud.extra_channels();

  struct Member {
    std::array<int, 3> cell;
    std::size_t index;
  };
  std::vector<Member> members;
  members.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    Member m{{}, i};
    bool in_range = true;
    for (int a = 0; a < 3 && in_range; ++a) {
      if (!(p[a] >= cfg.range_min[a] && p[a] < cfg.range_max[a])) {
        in_range = false;
        break;
      }
      const int c = static_cast<int>(std::floor((p[a] - cfg.range_min[a]) / cfg.voxel_size[a]));
      m.cell[a] = std::clamp(c, 0, dims[a] - 1);
    }
    if (in_range) members.push_back(m);
  }

  // Canonical order: by cell, then by the full point row. Ties are exact
  // duplicates, so their relative order cannot change the sums.
  std::sort(members.begin(), members.end(), [&](const Member& a, const Member& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    const auto pa = cloud.point(a.index);
    const auto pb = cloud.point(b.index);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  });

  VoxelSet out;
  out.feature_width = extras + 3;
  for (std::size_t begin = 0; begin < members.size();) {
    std::size_t end = begin;
    while (end < members.size() && members[end].cell == members[begin].cell) ++end;
    Voxel v;
    v.cell = members[begin].cell;
    for (int a = 0; a < 3; ++a) v.center[a] = cfg.range_min[a] + (v.cell[a] + 0.5) * cfg.voxel_size[a];
    v.point_count = static_cast<int>(end - begin);
    v.feature.assign(out.feature_width, 0.0);
    for (std::size_t k = begin; k < end; ++k) {
      const auto p = cloud.point(members[k].index);
      for (int e = 0; e < extras; ++e) v.feature[e] += p[3 + e];
      for (int a = 0; a < 3; ++a) v.feature[extras + a] += p[a] - v.center[a];
    }
    for (auto& f : v.feature) f /= v.point_count;
    out.voxels.push_back(std::move(v));
    begin = end;
  }
  return out;
}

}  // namespace deformfuse
