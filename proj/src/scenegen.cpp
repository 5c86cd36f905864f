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

#include "deformfuse/scenegen.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "deformfuse/errors.hpp"
#include "deformfuse/pyramid.hpp"

namespace deformfuse {

// ---------------------------------------------------------------------------
// Pyramid

void FeaturePyramid::validate() const {
  if (levels.empty() || levels.size() != scales.size()) throw InvalidInput("FeaturePyramid: one scale per level required");
  validate_pyramid_scales(scales);
  const int h0 = levels[0].height(), w0 = levels[0].width(), d = levels[0].channels();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const int eh = static_cast<int>(std::ceil(h0 * scales[l]));
    const int ew = static_cast<int>(std::ceil(w0 * scales[l]));
    if (levels[l].height() != eh || levels[l].width() != ew || levels[l].channels() != d) {
      throw InvalidInput("FeaturePyramid: level " + std::to_string(l) + " has inconsistent dimensions");
    }
  }
}

std::vector<MapView> FeaturePyramid::views() const {
  std::vector<MapView> out;
  out.reserve(levels.size());
  for (const auto& level : levels) out.push_back(level.view());
  return out;
}

FeaturePyramid generate_pyramid(const FeatureMap& image, int levels) {
  if (levels < 1) throw InvalidInput("generate_pyramid: levels must be >= 1");
  if (image.empty()) throw InvalidInput("generate_pyramid: empty image");
  FeaturePyramid p;
  p.levels.push_back(image);
  p.scales.push_back(1.0);
  for (int l = 1; l < levels; ++l) {
    const FeatureMap& prev = p.levels.back();
    const int h = (prev.height() + 1) / 2, w = (prev.width() + 1) / 2, d = prev.channels();
    FeatureMap next(h, w, d);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        auto dst = next.pixel(y, x);
        int count = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int sy = 2 * y + dy, sx = 2 * x + dx;
            if (sy >= prev.height() || sx >= prev.width()) continue;
            const auto src = prev.pixel(sy, sx);
            for (int c = 0; c < d; ++c) dst[c] += src[c];
            ++count;
          }
        }
        for (int c = 0; c < d; ++c) dst[c] /= count;
      }
    }
    p.levels.push_back(std::move(next));
    p.scales.push_back(std::ldexp(1.0, -l));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Rig and rendering

void SceneConfig::validate() const {
  if (camera_count < 1 || box_count < 0 || points_per_box < 0 || ground_points < 0) {
    throw InvalidInput("SceneConfig: counts must be non-negative (at least one camera)");
  }
  if (image_width < 2 || image_height < 2 || !(focal > 0.0)) throw InvalidInput("SceneConfig: bad image geometry");
  if (!(min_radius > 0.0) || !(max_radius > min_radius)) throw InvalidInput("SceneConfig: bad placement radii");
  if (max_placement_attempts < 1) throw InvalidInput("SceneConfig: max_placement_attempts must be >= 1");
}

CameraRig make_ring_rig(int camera_count, int image_width, int image_height, double focal) {
  if (camera_count < 1) throw InvalidInput("make_ring_rig: need at least one camera");
  CameraRig rig;
  for (int i = 0; i < camera_count; ++i) {
    const double yaw = 2.0 * std::numbers::pi * i / camera_count;
    const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
    const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
    const Eigen::Vector3d down(0.0, 0.0, -1.0);
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    const Eigen::Vector3d optical_center = 0.3 * forward;

    CameraCalibration cam;
    cam.cam_from_lidar.topLeftCorner<3, 3>() = r;
    cam.cam_from_lidar.topRightCorner<3, 1>() = -r * optical_center;
    cam.rect_rot = Eigen::AngleAxisd(0.002 * (i + 1), Eigen::Vector3d::UnitZ()).toRotationMatrix();
    cam.intrinsics << focal, 0.0, 0.5 * (image_width - 1), 0.0, focal, 0.5 * (image_height - 1), 0.0, 0.0, 1.0;
    cam.image_width = image_width;
    cam.image_height = image_height;
    rig.cameras.push_back(cam);
    rig.priority.push_back(i);
  }
  rig.validate();
  return rig;
}

namespace {

constexpr double kNearPlane = 0.1;

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

struct CategorySpec {
  const char* name;
  Eigen::Vector3d size;
};

constexpr int kCategoryCount = 3;
const CategorySpec kCategories[kCategoryCount] = {
    {"car", {4.2, 1.8, 1.6}},
    {"pedestrian", {0.8, 0.8, 1.8}},
    {"cyclist", {1.8, 0.7, 1.7}},
};

void sample_box_surface(const Box3D& box, int count, double intensity, std::mt19937_64& rng, PointCloud& cloud) {
  const double sx = box.size.x(), sy = box.size.y(), sz = box.size.z();
  // Faces as (normal axis, sign); areas weight the face choice.
  const double areas[6] = {sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy};
  std::discrete_distribution<int> face(std::begin(areas), std::end(areas));
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  for (int i = 0; i < count; ++i) {
    const int f = face(rng);
    Eigen::Vector3d local(u(rng) * sx, u(rng) * sy, u(rng) * sz);
    const double sign = (f % 2 == 0) ? 0.5 : -0.5;
    local[f / 2] = sign * box.size[f / 2];
    const double p[4] = {box.center.x() + c * local.x() - s * local.y(), box.center.y() + s * local.x() + c * local.y(),
                         box.center.z() + local.z(), intensity};
    cloud.push_back(p);
  }
}

}  // namespace

std::optional<std::vector<Eigen::Vector2d>> projected_box_hull(const CameraCalibration& calib, const Box3D& box) {
  std::vector<Eigen::Vector2d> pts;
  for (const auto& corner : box.corners()) {
    const auto plane = project_to_image_plane(calib, corner);
    if (!plane || plane->z() < kNearPlane) return std::nullopt;
    pts.emplace_back(plane->x(), plane->y());
  }
  return convex_hull(std::move(pts));
}

std::vector<bool> rasterize_hull(const std::vector<Eigen::Vector2d>& hull, int width, int height) {
  std::vector<bool> mask(static_cast<std::size_t>(width) * height, false);
  if (hull.size() < 3) return mask;
  double xmin = hull[0].x(), xmax = xmin, ymin = hull[0].y(), ymax = ymin;
  for (const auto& p : hull) {
    xmin = std::min(xmin, p.x()), xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y()), ymax = std::max(ymax, p.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::ceil(xmin))), x1 = std::min(width - 1, static_cast<int>(std::floor(xmax)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(ymin))), y1 = std::min(height - 1, static_cast<int>(std::floor(ymax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Eigen::Vector2d p(x, y);
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        inside = cross(hull[i], hull[(i + 1) % hull.size()], p) >= -1e-9;
      }
      if (inside) mask[static_cast<std::size_t>(y) * width + x] = true;
    }
  }
  return mask;
}

SceneSample generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneSample scene;
  scene.rig = make_ring_rig(config.camera_count, config.image_width, config.image_height, config.focal);

  for (int b = 0; b < config.box_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
      const int cat = std::uniform_int_distribution<int>(0, kCategoryCount - 1)(rng);
      const double radius = config.min_radius + (config.max_radius - config.min_radius) * unit(rng);
      const double bearing = 2.0 * std::numbers::pi * unit(rng);
      Box3D box;
      box.size = kCategories[cat].size * (0.9 + 0.2 * unit(rng));
      box.center = Eigen::Vector3d(radius * std::cos(bearing), radius * std::sin(bearing),
                                   config.ground_z + 0.5 * box.size.z());
      box.yaw = std::numbers::pi * (2.0 * unit(rng) - 1.0);
      const bool collides = std::any_of(scene.annotations.begin(), scene.annotations.end(),
                                        [&](const Annotation& a) { return bev_overlap(a.box, box); });
      if (collides) continue;
      Annotation ann;
      ann.box = box;
      ann.category = kCategories[cat].name;
      const int dominant = std::uniform_int_distribution<int>(0, 2)(rng);
      for (int ch = 0; ch < 3; ++ch) ann.color[ch] = ch == dominant ? 0.8 + 0.2 * unit(rng) : 0.3 * unit(rng);
      scene.annotations.push_back(ann);
      placed = true;
    }
    if (!placed) throw GenerationError("generate_scene: could not place box " + std::to_string(b));
  }

  for (const auto& ann : scene.annotations) {
    sample_box_surface(ann.box, config.points_per_box, 0.4 + 0.6 * unit(rng), rng, scene.cloud);
  }
  for (int i = 0; i < config.ground_points; ++i) {
    const double x = config.ground_extent * (2.0 * unit(rng) - 1.0);
    const double y = config.ground_extent * (2.0 * unit(rng) - 1.0);
    const double intensity = 0.1 + 0.2 * unit(rng);
    const Eigen::Vector3d p(x, y, config.ground_z);
    const bool under_box = std::any_of(scene.annotations.begin(), scene.annotations.end(),
                                       [&](const Annotation& a) { return a.box.contains(p); });
    if (under_box) continue;
    const double row[4] = {x, y, config.ground_z, intensity};
    scene.cloud.push_back(row);
  }

  for (const auto& cam : scene.rig.cameras) {
    FeatureMap image(cam.image_height, cam.image_width, 3,
                     std::vector<double>(static_cast<std::size_t>(cam.image_height) * cam.image_width * 3, kBackgroundGray));
    // Painter's order: far boxes first so nearer ones overwrite them.
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < scene.annotations.size(); ++i) {
      if (const auto plane = project_to_image_plane(cam, scene.annotations[i].box.center)) {
        order.emplace_back(plane->z(), i);
      }
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (const auto& [depth, i] : order) {
      const auto hull = projected_box_hull(cam, scene.annotations[i].box);
      if (!hull) continue;
      const auto mask = rasterize_hull(*hull, cam.image_width, cam.image_height);
      for (int y = 0; y < cam.image_height; ++y) {
        for (int x = 0; x < cam.image_width; ++x) {
          if (!mask[static_cast<std::size_t>(y) * cam.image_width + x]) continue;
          auto px = image.pixel(y, x);
          for (int ch = 0; ch < 3; ++ch) px[ch] = scene.annotations[i].color[ch];
        }
      }
    }
    scene.images.push_back(std::move(image));
  }
  return scene;
}

}  // namespace deformfuse
