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

#include "deformfuse/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "deformfuse/errors.hpp"

namespace deformfuse {

namespace {

constexpr double kMinDepth = 1e-9;

bool all_finite(const auto& m) { return m.allFinite(); }

}  // namespace

void CameraCalibration::validate() const {
  if (!all_finite(rect_rot) || !all_finite(intrinsics) || !all_finite(cam_from_lidar)) {
    throw InvalidInput("CameraCalibration: non-finite entry");
  }
  if ((rect_rot.transpose() * rect_rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidInput("CameraCalibration: rect_rot is not orthonormal");
  }
  if (cam_from_lidar.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw InvalidInput("CameraCalibration: extrinsic bottom row must be (0,0,0,1)");
  }
  const Eigen::Matrix3d r = cam_from_lidar.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidInput("CameraCalibration: extrinsic is not rigid");
  }
  if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0 || intrinsics(2, 2) != 1.0) {
    throw InvalidInput("CameraCalibration: intrinsics must be upper-triangular with K(2,2) = 1");
  }
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw InvalidInput("CameraCalibration: focal lengths must be positive");
  }
  if (image_width <= 0 || image_height <= 0) throw InvalidInput("CameraCalibration: image size must be positive");
}

void CameraRig::validate() const {
  if (cameras.empty()) throw InvalidInput("CameraRig: no cameras");
  if (priority.size() != cameras.size()) throw InvalidInput("CameraRig: priority length != camera count");
  std::vector<bool> seen(cameras.size(), false);
  for (int idx : priority) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= cameras.size() || seen[idx]) {
      throw InvalidInput("CameraRig: priority is not a permutation");
    }
    seen[idx] = true;
  }
  for (const auto& cam : cameras) cam.validate();
}

std::optional<Eigen::Vector3d> project_to_image_plane(const CameraCalibration& calib, const Eigen::Vector3d& v) {
  if (!v.allFinite()) throw InvalidInput("project_point: non-finite point");
  const Eigen::Vector3d cam = calib.cam_from_lidar.topLeftCorner<3, 3>() * v + calib.cam_from_lidar.topRightCorner<3, 1>();
  const Eigen::Vector3d h = calib.rc() * cam;
  const double depth = h.z();
  if (!(depth > kMinDepth)) return std::nullopt;
  return Eigen::Vector3d(h.x() / depth, h.y() / depth, depth);
}

std::optional<ProjectionResult> project_point(const CameraCalibration& calib, const Eigen::Vector3d& v) {
  const auto plane = project_to_image_plane(calib, v);
  if (!plane) return std::nullopt;
  const double px = plane->x(), py = plane->y(), depth = plane->z();
  if (!(px >= 0.0 && py >= 0.0 && px <= calib.image_width - 1 && py <= calib.image_height - 1)) return std::nullopt;
  return ProjectionResult{0, PixelCoord{px, py}, depth};
}

Eigen::Vector3d back_project(const CameraCalibration& calib, PixelCoord pixel, double depth) {
  const Eigen::Vector3d h(pixel.x * depth, pixel.y * depth, depth);
  const Eigen::Vector3d cam = calib.rc().inverse() * h;
  const Eigen::Matrix3d r = calib.cam_from_lidar.topLeftCorner<3, 3>();
  return r.transpose() * (cam - calib.cam_from_lidar.topRightCorner<3, 1>());
}

std::optional<ProjectionResult> select_camera(const CameraRig& rig, const Eigen::Vector3d& v) {
  if (rig.cameras.empty()) throw InvalidInput("select_camera: empty rig");
  for (int idx : rig.priority) {
    if (auto hit = project_point(rig.cameras[idx], v)) {
      hit->camera_index = idx;
      return hit;
    }
  }
  return std::nullopt;
}

void validate_pyramid_scales(std::span<const double> scales) {
  if (scales.empty() || scales.front() != 1.0) throw InvalidInput("pyramid scales must start at 1");
  for (std::size_t i = 1; i < scales.size(); ++i) {
    if (!(scales[i] < scales[i - 1]) || !(scales[i] > 0.0)) {
      throw InvalidInput("pyramid scales must be positive and strictly decreasing");
    }
  }
}

std::optional<ReferencePoints> voxel_center_to_reference(const Eigen::Vector3d& center, const CameraRig& rig,
                                                         std::span<const double> scales) {
  validate_pyramid_scales(scales);
  auto hit = select_camera(rig, center);
  if (!hit) return std::nullopt;
  ReferencePoints refs{*hit, {}};
  refs.levels.reserve(scales.size());
  for (double s : scales) refs.levels.push_back(PixelCoord{hit->pixel.x * s, hit->pixel.y * s});
  return refs;
}

std::array<Eigen::Vector3d, 8> Box3D::corners() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hx = 0.5 * size.x(), hy = 0.5 * size.y(), hz = 0.5 * size.z();
  const double lx[4] = {hx, -hx, -hx, hx};
  const double ly[4] = {hy, hy, -hy, -hy};
  std::array<Eigen::Vector3d, 8> out;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d xy(center.x() + c * lx[i] - s * ly[i], center.y() + s * lx[i] + c * ly[i], 0.0);
    out[i] = Eigen::Vector3d(xy.x(), xy.y(), center.z() - hz);
    out[i + 4] = Eigen::Vector3d(xy.x(), xy.y(), center.z() + hz);
  }
  return out;
}

std::array<Eigen::Vector2d, 4> Box3D::bev_corners() const {
  const auto c = corners();
  return {Eigen::Vector2d(c[0].x(), c[0].y()), Eigen::Vector2d(c[1].x(), c[1].y()),
          Eigen::Vector2d(c[2].x(), c[2].y()), Eigen::Vector2d(c[3].x(), c[3].y())};
}

bool Box3D::contains(const Eigen::Vector3d& p, double tol) const {
  const Eigen::Vector3d d = p - center;
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double local_x = c * d.x() + s * d.y();
  const double local_y = -s * d.x() + c * d.y();
  return std::abs(local_x) <= 0.5 * size.x() + tol && std::abs(local_y) <= 0.5 * size.y() + tol &&
         std::abs(d.z()) <= 0.5 * size.z() + tol;
}

bool Box3D::valid() const { return center.allFinite() && std::isfinite(yaw) && (size.array() > 0.0).all(); }

bool bev_overlap(const Box3D& a, const Box3D& b) {
  // Separating axis test over the four edge normals; touching counts as separated.
  const auto pa = a.bev_corners();
  const auto pb = b.bev_corners();
  const auto separated_along = [](const std::array<Eigen::Vector2d, 4>& p, const std::array<Eigen::Vector2d, 4>& q) {
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d edge = p[i + 1] - p[i];
      const Eigen::Vector2d axis(-edge.y(), edge.x());
      double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
      for (int k = 0; k < 4; ++k) {
        const double u = axis.dot(p[k]);
        const double v = axis.dot(q[k]);
        pmin = std::min(pmin, u), pmax = std::max(pmax, u);
        qmin = std::min(qmin, v), qmax = std::max(qmax, v);
      }
      const double tol = 1e-12 * axis.norm() * (1.0 + std::abs(pmax) + std::abs(qmax));
      if (pmax <= qmin + tol || qmax <= pmin + tol) return true;
    }
    return false;
  };
  return !separated_along(pa, pb) && !separated_along(pb, pa);
}

}  // namespace deformfuse
