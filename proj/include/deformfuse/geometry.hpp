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

// Pinhole projection from the LiDAR frame into rectified camera pixels and
// priority-ordered camera selection for overlapping fields of view.

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deformfuse {

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const PixelCoord&) const = default;
};

struct CameraCalibration {
  Eigen::Matrix3d rect_rot = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  /// Rigid LiDAR -> camera transform.
  Eigen::Matrix4d cam_from_lidar = Eigen::Matrix4d::Identity();
  int image_width = 0;
  int image_height = 0;

  /// Throws InvalidInput unless rect_rot is orthonormal (1e-9), the extrinsic
  /// bottom row is (0,0,0,1), and intrinsics are upper-triangular with
  /// positive focal entries and bottom row (0,0,1).
  void validate() const;

  /// Intrinsics times rectifying rotation.
  Eigen::Matrix3d rc() const { return intrinsics * rect_rot; }
};

struct CameraRig {
  std::vector<CameraCalibration> cameras;
  /// Fetch order; a permutation of camera indices.
  std::vector<int> priority;

  void validate() const;
  std::size_t size() const { return cameras.size(); }
};

struct ProjectionResult {
  int camera_index = 0;
  PixelCoord pixel;
  double depth = 0.0;  // z in the rectified camera frame, meters
};

/// Out-of-view (nullopt) when depth <= 1e-9 or the pixel falls outside the
/// closed box [0, w-1] x [0, h-1]. camera_index is left at 0.
std::optional<ProjectionResult> project_point(const CameraCalibration& calib, const Eigen::Vector3d& v);

/// Pixel (x, y) and depth without the image-bounds test; nullopt when depth <= 1e-9.
std::optional<Eigen::Vector3d> project_to_image_plane(const CameraCalibration& calib, const Eigen::Vector3d& v);

/// Inverse of project_point for a known depth.
Eigen::Vector3d back_project(const CameraCalibration& calib, PixelCoord pixel, double depth);

/// First camera in priority order that sees `v`.
std::optional<ProjectionResult> select_camera(const CameraRig& rig, const Eigen::Vector3d& v);

struct ReferencePoints {
  ProjectionResult projection;
  std::vector<PixelCoord> levels;  // level l = full-resolution pixel * scale_l
};

/// `scales` must start at 1 and be strictly decreasing.
std::optional<ReferencePoints> voxel_center_to_reference(const Eigen::Vector3d& center, const CameraRig& rig,
                                                         std::span<const double> scales);

void validate_pyramid_scales(std::span<const double> scales);

/// Oriented 3D box: center, extents along (heading, lateral, up), yaw about +z.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;

  /// Corner order: bottom face counter-clockwise, then top face.
  std::array<Eigen::Vector3d, 8> corners() const;
  /// BEV rectangle, counter-clockwise.
  std::array<Eigen::Vector2d, 4> bev_corners() const;
  /// Closed containment test with a small tolerance.
  bool contains(const Eigen::Vector3d& p, double tol = 1e-9) const;
  bool valid() const;
};

/// True when the BEV footprints overlap with positive area (touching edges do not count).
bool bev_overlap(const Box3D& a, const Box3D& b);

// Calibration text format; grammar in docs/formats.md.
void write_calibration(std::ostream& os, const CameraRig& rig);
CameraRig read_calibration(std::istream& is);
void save_calibration(const std::string& path, const CameraRig& rig);
CameraRig load_calibration(const std::string& path);

}  // namespace deformfuse
