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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"

namespace deformfuse {

std::size_t DropoutMask::kept_count() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)); }

DropoutMask make_dropout_mask(int camera_count, int keep_count, std::uint64_t seed) {
  if (camera_count < 0 || keep_count < 0 || keep_count > camera_count) {
    throw InvalidInput("make_dropout_mask: keep_count must lie in [0, camera_count]");
  }
  std::vector<int> order(camera_count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first keep_count entries are a uniform subset.
  for (int i = 0; i < keep_count; ++i) {
    std::uniform_int_distribution<int> pick(i, camera_count - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  DropoutMask mask{std::vector<bool>(camera_count, false)};
  for (int i = 0; i < keep_count; ++i) mask.keep[order[i]] = true;
  return mask;
}

namespace {

void fuse_range(const VoxelSet& voxels, const std::vector<std::vector<MapView>>& views,
                const std::vector<std::optional<FeaturePyramid>>& pyramids, const CameraRig& rig,
                const DeformCafaParams& params, const DropoutMask& mask, FusedVoxelSet& out, std::size_t begin,
                std::size_t end) {
  std::vector<PixelCoord> refs;
  for (std::size_t i = begin; i < end; ++i) {
    const Voxel& v = voxels.voxels[i];
    out.fused[i] = v.feature;
    const auto hit = select_camera(rig, v.center);
    if (!hit || !mask.keep[hit->camera_index]) continue;
    const auto& pyramid = *pyramids[hit->camera_index];
    refs.clear();
    for (double s : pyramid.scales) refs.push_back(PixelCoord{hit->pixel.x * s, hit->pixel.y * s});
    const Vec image = deform_cafa(views[hit->camera_index], refs, v.feature, params);
    double sq = 0.0;
    for (std::size_t k = 0; k < image.size(); ++k) {
      out.fused[i][k] += image[k];
      sq += image[k] * image[k];
    }
    out.source[i] = hit->camera_index;
    out.image_norm[i] = std::sqrt(sq);
  }
}

}  // namespace

FusedVoxelSet fuse_scene(const VoxelSet& voxels, const std::vector<std::optional<FeaturePyramid>>& pyramids,
                         const CameraRig& rig, const DeformCafaParams& params, const DropoutMask& mask,
                         const FuseOptions& options) {
  rig.validate();
  params.validate();
  if (mask.keep.size() != rig.size()) throw ConfigError("fuse_scene: dropout mask length != camera count");
  if (pyramids.size() != rig.size()) throw ConfigError("fuse_scene: need one pyramid slot per camera");
  if (!voxels.voxels.empty() && voxels.feature_width != params.config.voxel_channels) {
    throw ConfigError("fuse_scene: voxel feature width " + std::to_string(voxels.feature_width) +
                      " != params voxel channels " + std::to_string(params.config.voxel_channels));
  }
  std::vector<std::vector<MapView>> views(rig.size());
  for (std::size_t cam = 0; cam < rig.size(); ++cam) {
    if (!mask.keep[cam]) continue;
    if (!pyramids[cam]) throw ConfigError("fuse_scene: missing pyramid for kept camera " + std::to_string(cam));
    pyramids[cam]->validate();
    validate_pyramid_scales(pyramids[cam]->scales);
    views[cam] = pyramids[cam]->views();
  }

  FusedVoxelSet out;
  out.voxels = voxels;
  const std::size_t n = voxels.size();
  out.fused.resize(n);
  out.source.assign(n, std::nullopt);
  out.image_norm.assign(n, 0.0);

  const int threads = std::max(1, options.threads);
  if (threads == 1 || n < 2) {
    fuse_range(voxels, views, pyramids, rig, params, mask, out, 0, n);
    return out;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk), end = std::min(n, begin + chunk);
    workers.emplace_back([&, t, begin, end] {
      try {
        fuse_range(voxels, views, pyramids, rig, params, mask, out, begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace deformfuse
