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

// Ground-truth cut-and-paste augmentation that keeps LiDAR points and camera
// images in sync: object points are appended to the cloud and object image
// patches are mixed into the target image far-to-near with ratio alpha.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deformfuse/geometry.hpp"
#include "deformfuse/scenegen.hpp"
#include "deformfuse/tensor.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PatchBounds {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool operator==(const PatchBounds&) const = default;
};

struct GtObject {
  std::string category;
  PointCloud points{1};
  Box3D box;
  std::array<double, 3> color{};
  double depth = 0.0;  // camera-frame depth of the box center
  int camera_index = 0;
  PatchBounds bounds;  // in the source camera image
  FeatureMap patch;    // bounds.height() x bounds.width() crop

  /// depth > 0, non-empty bounds matching the patch, points inside the box.
  void validate() const;
};

struct GtDatabase {
  std::map<std::string, std::vector<GtObject>> categories;

  std::size_t size() const;
  void validate() const;
};

enum class CollisionPolicy {
  kRejectBevOverlap,  // any positive-area BEV overlap rejects the candidate
};

struct AugConfig {
  double alpha = 0.6;
  int default_max_paste = 4;
  std::map<std::string, int> max_paste;  // per-category override
  CollisionPolicy collision = CollisionPolicy::kRejectBevOverlap;

  void validate() const;
  int max_paste_for(const std::string& category) const;
};

/// Greedy in input order: a candidate is accepted unless its BEV footprint
/// overlaps an existing box or an already accepted candidate. Returns the
/// accepted candidate indices in order.
std::vector<std::size_t> collision_filter(std::span<const Box3D> candidates, std::span<const Box3D> existing);

/// image[bounds] = alpha * image[bounds] + (1 - alpha) * patch, with the
/// bounds clipped to the image (and the patch) before cropping and pasting.
void composite_patch(FeatureMap& image, const FeatureMap& patch, const PatchBounds& bounds, double alpha);

struct PastedObject {
  std::string category;
  std::size_t database_index = 0;
  int camera_index = 0;
  PatchBounds bounds;
  double depth = 0.0;
};

struct AugmentResult {
  SceneSample scene;
  std::vector<PastedObject> pasted;  // in compositing order (far to near)
};

AugmentResult depth_aware_gt_aug_detailed(const SceneSample& scene, const GtDatabase& db, const AugConfig& cfg,
                                          std::uint64_t seed);
SceneSample depth_aware_gt_aug(const SceneSample& scene, const GtDatabase& db, const AugConfig& cfg,
                               std::uint64_t seed);

/// Tight pixel bounds of a box on one camera: the integer pixels inside the
/// min/max of its 8 projected corners, clipped to the image. Empty when any
/// corner is behind the camera.
PatchBounds projected_box_bounds(const CameraCalibration& calib, const Box3D& box);

GtDatabase build_gt_database(std::span<const SceneSample> scenes);

/// One directory per category; per object NNNN.pcld, NNNN.fmap and NNNN.meta.
void save_gt_database(const std::string& dir, const GtDatabase& db);
GtDatabase load_gt_database(const std::string& dir);

}  // namespace deformfuse
