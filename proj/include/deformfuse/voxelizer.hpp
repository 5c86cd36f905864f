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

#pragma once

// Dynamic voxelization: only non-empty cells are stored, each with the mean
// of its member point features and the mean offset from the cell center.

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deformfuse/tensor.hpp"

namespace deformfuse {

/// Flat point storage: each row is (x, y, z, extra_0, ..., extra_{E-1}).
class PointCloud {
 public:
  explicit PointCloud(int extra_channels = 1);

  int extra_channels() const { return extra_channels_; }
  int stride() const { return 3 + extra_channels_; }
  std::size_t size() const { return rows_.size() / stride(); }
  bool empty() const { return rows_.empty(); }

  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(rows_).subspan(i * stride(), stride());
  }
  Eigen::Vector3d xyz(std::size_t i) const {
    const auto p = point(i);
    return {p[0], p[1], p[2]};
  }
  void push_back(std::span<const double> row);
  void append(const PointCloud& other);
  void reserve(std::size_t n) { rows_.reserve(n * stride()); }
  const std::vector<double>& rows() const { return rows_; }

  bool operator==(const PointCloud&) const = default;

 private:
  int extra_channels_;
  std::vector<double> rows_;
};

struct VoxelConfig {
  Eigen::Vector3d voxel_size{0.1, 0.1, 0.1};
  Eigen::Vector3d range_min{-40.0, -40.0, -3.0};
  Eigen::Vector3d range_max{40.0, 40.0, 1.0};

  /// Sizes positive, range non-degenerate and an integer number of cells per axis.
  void validate() const;
  std::array<int, 3> grid_dims() const;
};

struct Voxel {
  std::array<int, 3> cell{};
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Vec feature;  // mean extras, then mean (p - center)
  int point_count = 0;

  bool operator==(const Voxel&) const = default;
};

struct VoxelSet {
  int feature_width = 0;
  std::vector<Voxel> voxels;  // lexicographic by cell

  std::size_t size() const { return voxels.size(); }
  bool operator==(const VoxelSet&) const = default;
};

/// Points outside the half-open range are dropped. Member points are reduced
/// in lexicographic row order, so the result does not depend on input order.
VoxelSet voxelize(const PointCloud& cloud, const VoxelConfig& cfg);

// PCLD: "PCLD", u32 count, u32 extra channels, then count * (3 + E) f64.
void write_pcld(std::ostream& os, const PointCloud& cloud);
PointCloud read_pcld(std::istream& is);
void save_pcld(const std::string& path, const PointCloud& cloud);
PointCloud load_pcld(const std::string& path);

/// CSV with header `x,y,z,intensity` (further columns become extra channels).
void write_points_csv(std::ostream& os, const PointCloud& cloud);
PointCloud read_points_csv(std::istream& is);

}  // namespace deformfuse
