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

// Deterministic synthetic multi-camera scenes: a ring rig, box objects with
// surface-sampled points over a ground plane, and flat-color rendered images.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deformfuse/geometry.hpp"
#include "deformfuse/tensor.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

struct Annotation {
  Box3D box;
  std::string category;
  std::array<double, 3> color{};  // rendered RGB

  bool operator==(const Annotation& o) const {
    return box.center == o.box.center && box.size == o.box.size && box.yaw == o.box.yaw && category == o.category &&
           color == o.color;
  }
};

struct SceneSample {
  PointCloud cloud{1};             // x, y, z, intensity
  std::vector<FeatureMap> images;  // one RGB map per camera
  CameraRig rig;
  std::vector<Annotation> annotations;

  bool operator==(const SceneSample& o) const {
    if (!(cloud == o.cloud && images == o.images && annotations == o.annotations)) return false;
    if (rig.priority != o.rig.priority || rig.cameras.size() != o.rig.cameras.size()) return false;
    for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
      const auto &a = rig.cameras[i], &b = o.rig.cameras[i];
      if (a.rect_rot != b.rect_rot || a.intrinsics != b.intrinsics || a.cam_from_lidar != b.cam_from_lidar ||
          a.image_width != b.image_width || a.image_height != b.image_height) {
        return false;
      }
    }
    return true;
  }
};

struct SceneConfig {
  int camera_count = 6;
  int box_count = 8;
  int points_per_box = 400;
  int ground_points = 2000;
  int image_width = 160;
  int image_height = 96;
  double focal = 80.0;  // 90 degree horizontal field of view at the default width
  double min_radius = 6.0;
  double max_radius = 30.0;
  double ground_z = -1.8;
  double ground_extent = 35.0;
  int max_placement_attempts = 500;

  void validate() const;
};

inline constexpr double kBackgroundGray = 0.5;

/// Cameras yaw-spaced by 360/count degrees around the LiDAR, looking
/// horizontally outward; priority is index order.
CameraRig make_ring_rig(int camera_count, int image_width, int image_height, double focal);

/// Projected convex hull of a box's 8 corners, counter-clockwise; nullopt if
/// any corner is closer than 0.1 m to (or behind) the image plane.
std::optional<std::vector<Eigen::Vector2d>> projected_box_hull(const CameraCalibration& calib, const Box3D& box);

/// Row-major h x w mask of pixels whose integer coordinates fall inside the hull.
std::vector<bool> rasterize_hull(const std::vector<Eigen::Vector2d>& hull, int width, int height);

SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Scene directory: cloud.pcld, calib.txt, cam_<i>.fmap, annotations.csv.
void save_scene(const std::string& dir, const SceneSample& scene);
SceneSample load_scene(const std::string& dir);

}  // namespace deformfuse
