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

#include "deformfuse/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "deformfuse/errors.hpp"

namespace deformfuse {

void GtObject::validate() const {
  if (!(depth > 0.0)) throw InvalidInput("GtObject: depth must be positive");
  if (bounds.empty()) throw InvalidInput("GtObject: empty patch bounds");
  if (patch.height() != bounds.height() || patch.width() != bounds.width()) {
    throw InvalidInput("GtObject: patch size does not match its bounds");
  }
  if (!box.valid()) throw InvalidInput("GtObject: invalid box");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!box.contains(points.xyz(i), 1e-6)) throw InvalidInput("GtObject: point outside its box");
  }
}

std::size_t GtDatabase::size() const {
  std::size_t n = 0;
  for (const auto& [_, objects] : categories) n += objects.size();
  return n;
}

void GtDatabase::validate() const {
  for (const auto& [name, objects] : categories) {
    if (objects.empty()) throw InvalidInput("GtDatabase: empty category " + name);
    for (const auto& o : objects) o.validate();
  }
}

void AugConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("AugConfig: alpha must lie in (0, 1]");
  if (default_max_paste < 0) throw InvalidInput("AugConfig: max_paste must be non-negative");
  for (const auto& [_, n] : max_paste) {
    if (n < 0) throw InvalidInput("AugConfig: max_paste must be non-negative");
  }
}

int AugConfig::max_paste_for(const std::string& category) const {
  const auto it = max_paste.find(category);
  return it == max_paste.end() ? default_max_paste : it->second;
}

std::vector<std::size_t> collision_filter(std::span<const Box3D> candidates, std::span<const Box3D> existing) {
  std::vector<std::size_t> accepted;
  std::vector<Box3D> occupied(existing.begin(), existing.end());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool hit = std::any_of(occupied.begin(), occupied.end(),
                                 [&](const Box3D& b) { return bev_overlap(candidates[i], b); });
    if (hit) continue;
    accepted.push_back(i);
    occupied.push_back(candidates[i]);
  }
  return accepted;
}

void composite_patch(FeatureMap& image, const FeatureMap& patch, const PatchBounds& bounds, double alpha) {
  if (patch.channels() != image.channels()) throw InvalidInput("composite_patch: channel mismatch");
  const int x0 = std::max(bounds.x0, 0), y0 = std::max(bounds.y0, 0);
  const int x1 = std::min({bounds.x1, image.width(), bounds.x0 + patch.width()});
  const int y1 = std::min({bounds.y1, image.height(), bounds.y0 + patch.height()});
  const double beta = 1.0 - alpha;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      auto dst = image.pixel(y, x);
      const auto src = patch.pixel(y - bounds.y0, x - bounds.x0);
      for (int c = 0; c < image.channels(); ++c) dst[c] = alpha * dst[c] + beta * src[c];
    }
  }
}

AugmentResult depth_aware_gt_aug_detailed(const SceneSample& scene, const GtDatabase& db, const AugConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);

  struct Candidate {
    const std::string* category;
    std::size_t index;
    const GtObject* object;
  };
  std::vector<Candidate> candidates;
  for (const auto& [name, objects] : db.categories) {
    std::vector<std::size_t> order(objects.size());
    std::iota(order.begin(), order.end(), 0);
    const int want = std::min<int>(cfg.max_paste_for(name), static_cast<int>(objects.size()));
    for (int i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
      candidates.push_back(Candidate{&name, order[i], &objects[order[i]]});
    }
  }

  std::vector<Box3D> boxes, existing;
  for (const auto& c : candidates) boxes.push_back(c.object->box);
  for (const auto& a : scene.annotations) existing.push_back(a.box);
  const auto accepted = collision_filter(boxes, existing);

  AugmentResult result;
  result.scene = scene;
  std::vector<Candidate> pasted;
  for (std::size_t i : accepted) pasted.push_back(candidates[i]);
  for (const auto& c : pasted) {
    if (c.object->points.extra_channels() != scene.cloud.extra_channels()) {
      throw InvalidInput("depth_aware_gt_aug: point channel mismatch between database and scene");
    }
    result.scene.cloud.append(c.object->points);
    result.scene.annotations.push_back(Annotation{c.object->box, c.object->category, c.object->color});
  }

  // Far to near: nearer patches are mixed on top and attenuate farther ones.
  std::stable_sort(pasted.begin(), pasted.end(),
                   [](const Candidate& a, const Candidate& b) { return a.object->depth > b.object->depth; });
  for (const auto& c : pasted) {
    const GtObject& o = *c.object;
    if (o.camera_index < 0 || static_cast<std::size_t>(o.camera_index) >= result.scene.images.size()) {
      throw InvalidInput("depth_aware_gt_aug: object camera index outside the scene rig");
    }
    composite_patch(result.scene.images[o.camera_index], o.patch, o.bounds, cfg.alpha);
    result.pasted.push_back(PastedObject{*c.category, c.index, o.camera_index, o.bounds, o.depth});
  }
  return result;
}

SceneSample depth_aware_gt_aug(const SceneSample& scene, const GtDatabase& db, const AugConfig& cfg,
                               std::uint64_t seed) {
  return depth_aware_gt_aug_detailed(scene, db, cfg, seed).scene;
}

PatchBounds projected_box_bounds(const CameraCalibration& calib, const Box3D& box) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& corner : box.corners()) {
    const auto plane = project_to_image_plane(calib, corner);
    if (!plane) return PatchBounds{};
    xmin = std::min(xmin, plane->x()), xmax = std::max(xmax, plane->x());
    ymin = std::min(ymin, plane->y()), ymax = std::max(ymax, plane->y());
  }
  const auto clip_lo = [](double v, int hi) { return static_cast<int>(std::clamp(std::ceil(v), 0.0, double(hi))); };
  const auto clip_hi = [](double v, int hi) { return static_cast<int>(std::clamp(std::floor(v) + 1.0, 0.0, double(hi))); };
  PatchBounds b{clip_lo(xmin, calib.image_width), clip_lo(ymin, calib.image_height), clip_hi(xmax, calib.image_width),
                clip_hi(ymax, calib.image_height)};
  if (b.empty()) return PatchBounds{};
  return b;
}

GtDatabase build_gt_database(std::span<const SceneSample> scenes) {
  GtDatabase db;
  for (const auto& scene : scenes) {
    for (const auto& ann : scene.annotations) {
      const auto hit = select_camera(scene.rig, ann.box.center);
      if (!hit) continue;
      const auto& cam = scene.rig.cameras[hit->camera_index];
      const PatchBounds bounds = projected_box_bounds(cam, ann.box);
      if (bounds.empty()) continue;

      GtObject o;
      o.category = ann.category;
      o.box = ann.box;
      o.color = ann.color;
      o.depth = hit->depth;
      o.camera_index = hit->camera_index;
      o.bounds = bounds;
      const FeatureMap& image = scene.images[hit->camera_index];
      FeatureMap patch(bounds.height(), bounds.width(), image.channels());
      for (int y = 0; y < bounds.height(); ++y) {
        for (int x = 0; x < bounds.width(); ++x) {
          const auto src = image.pixel(bounds.y0 + y, bounds.x0 + x);
          std::copy(src.begin(), src.end(), patch.pixel(y, x).begin());
        }
      }
      o.patch = std::move(patch);
      o.points = PointCloud(scene.cloud.extra_channels());
      for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
        if (ann.box.contains(scene.cloud.xyz(i))) o.points.push_back(scene.cloud.point(i));
      }
      db.categories[o.category].push_back(std::move(o));
    }
  }
  return db;
}

}  // namespace deformfuse
