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

// Cross-domain deformable cross-attention feature aggregation (DeformCAFA),
// its analytic backward pass, the dense all-pixel attention baseline and
// image-level dropout over a camera rig.

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "deformfuse/geometry.hpp"
#include "deformfuse/pyramid.hpp"
#include "deformfuse/tensor.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

struct DeformCafaConfig {
  int heads = 4;           // M
  int points = 8;          // K, sampling points per head
  int image_channels = 8;  // d
  int voxel_channels = 8;  // c
  int token_channels = 0;  // t; 0 means d
  int head_channels = 0;   // per-head value width; 0 means max(1, d / M)

  DeformCafaConfig resolved() const;
  void validate() const;
  bool operator==(const DeformCafaConfig&) const = default;
};

/// All learnable weights of the operator. Offsets are laid out as
/// (head, point, {x, y}) and attention logits as (head, point).
struct DeformCafaParams {
  DeformCafaConfig config;
  std::optional<LinearLayer> voxel_adapter;  // c -> d, present iff c != d
  LinearLayer token_fc;                      // d -> t
  LinearLayer offset_net;                    // t -> 2 M K
  LinearLayer attn_net;                      // t -> M K
  std::vector<LinearLayer> value_proj;       // per head, d -> d_h
  std::vector<LinearLayer> output_proj;      // per head, d_h -> c

  /// Standard start: offset_net and attn_net exactly zero, the rest uniform in [-scale, scale].
  static DeformCafaParams initial(const DeformCafaConfig& config, std::mt19937_64& rng, double scale = 0.5);
  /// Everything random; offset_net scaled so offsets are a few pixels.
  static DeformCafaParams random(const DeformCafaConfig& config, std::mt19937_64& rng, double scale = 0.5,
                                 double offset_scale = 1.0);
  /// Same shapes, all zeros (gradient accumulator).
  static DeformCafaParams zeros_like(const DeformCafaParams& other);
  /// M = 1, zero offsets, uniform attention, identity value projection and an
  /// output projection that embeds the d sampled channels into the first
  /// min(c, d) output channels. The operator then reduces to bilinear sampling.
  static DeformCafaParams passthrough(const DeformCafaConfig& config);

  void validate() const;
  std::size_t parameter_count() const;

  /// Visits every layer with a stable name ("token_fc", "value_proj[2]", ...).
  template <typename Self, typename Fn>
  static void visit_layers(Self& self, Fn&& fn) {
    if (self.voxel_adapter) fn(std::string("voxel_adapter"), *self.voxel_adapter);
    fn(std::string("token_fc"), self.token_fc);
    fn(std::string("offset_net"), self.offset_net);
    fn(std::string("attn_net"), self.attn_net);
    for (std::size_t m = 0; m < self.value_proj.size(); ++m) {
      fn("value_proj[" + std::to_string(m) + "]", self.value_proj[m]);
    }
    for (std::size_t m = 0; m < self.output_proj.size(); ++m) {
      fn("output_proj[" + std::to_string(m) + "]", self.output_proj[m]);
    }
  }
  template <typename Fn> void for_each_layer(Fn&& fn) { visit_layers(*this, fn); }
  template <typename Fn> void for_each_layer(Fn&& fn) const { visit_layers(*this, fn); }

  bool operator==(const DeformCafaParams&) const = default;
};

struct CrossDomainToken {
  Vec value;
};

/// token_fc(image_feature * adapt(voxel_feature)), elementwise product.
CrossDomainToken make_token(std::span<const double> image_feature, std::span<const double> voxel_feature,
                            const DeformCafaParams& params);

/// Per-head softmax attention weights A (M x K) for a token.
Vec attention_weights(const CrossDomainToken& token, const DeformCafaParams& params);
/// Sampling offsets (M x K x 2, pixels) for a token.
Vec sampling_offsets(const CrossDomainToken& token, const DeformCafaParams& params);

/// sum_m W_m [ sum_k A_mk W'_m F(R + dR_mk) ] on one level.
Vec deform_cafa_single(const MapView& level, PixelCoord reference, const CrossDomainToken& token,
                       const DeformCafaParams& params);

/// deform_cafa_single on each level with the same weights, averaged over levels.
Vec deform_cafa_multilevel(std::span<const MapView> levels, std::span<const PixelCoord> references,
                           const CrossDomainToken& token, const DeformCafaParams& params);

/// Full operator for one voxel: the token is built from the level-0 bilinear
/// sample at references[0] and the voxel feature, then aggregated over levels.
Vec deform_cafa(std::span<const MapView> levels, std::span<const PixelCoord> references,
                std::span<const double> voxel_feature, const DeformCafaParams& params);

struct DeformCafaGrads {
  DeformCafaParams params;   // same shapes as the forward params
  std::vector<Vec> levels;   // dL/dF per level, shaped like the level data
  Vec voxel_feature;         // dL/dP
};

/// Gradients of <upstream, deform_cafa(...)> with respect to every weight,
/// every pyramid level and the voxel feature.
DeformCafaGrads deform_cafa_backward(std::span<const MapView> levels, std::span<const PixelCoord> references,
                                     std::span<const double> voxel_feature, const DeformCafaParams& params,
                                     std::span<const double> upstream);

/// deform_cafa for N voxels sharing one pyramid. References are level-0
/// pixels; level l uses reference * scales[l]. Returns N x c row-major.
Vec deform_cafa_batch(std::span<const MapView> levels, std::span<const double> scales,
                      std::span<const PixelCoord> level0_references, std::span<const double> voxel_features,
                      const DeformCafaParams& params);

// ---------------------------------------------------------------------------
// Dense baseline: every voxel attends over all h*w pixels.

struct DenseCafaConfig {
  int image_channels = 8;
  int voxel_channels = 8;
  int key_channels = 8;
  int value_channels = 8;
  void validate() const;
};

struct DenseCafaParams {
  DenseCafaConfig config;
  LinearLayer query;   // c -> dk
  LinearLayer key;     // d -> dk
  LinearLayer value;   // d -> dv
  LinearLayer output;  // dv -> c

  static DenseCafaParams random(const DenseCafaConfig& config, std::mt19937_64& rng, double scale = 0.5);
  void validate() const;
};

/// Softmax over all pixels of query(p) . key(f_i) / sqrt(dk).
Vec dense_cafa_attention(const MapView& map, std::span<const double> voxel_feature, const DenseCafaParams& params);
/// output(sum_i a_i value(f_i)).
Vec dense_cafa(const MapView& map, std::span<const double> voxel_feature, const DenseCafaParams& params);
/// Blocked multi-query version of dense_cafa; voxel_features is N x c, result N x c.
Vec dense_cafa_batch(const MapView& map, std::span<const double> voxel_features, const DenseCafaParams& params);

// ---------------------------------------------------------------------------
// Image-level dropout and scene fusion.

struct DropoutMask {
  std::vector<bool> keep;
  std::size_t kept_count() const;
};

/// Uniformly random keep_count-subset of cameras, deterministic in the seed.
DropoutMask make_dropout_mask(int camera_count, int keep_count, std::uint64_t seed);

struct FusedVoxelSet {
  VoxelSet voxels;
  std::vector<Vec> fused;                   // voxel feature + image contribution
  std::vector<std::optional<int>> source;   // camera whose features were fused
  std::vector<double> image_norm;           // L2 norm of the image contribution
};

struct FuseOptions {
  int threads = 1;
};

/// Per voxel: pick the priority-first camera that sees the center; if it is
/// kept, add deform_cafa over its pyramid, otherwise add nothing. Pyramids
/// may be missing only for dropped cameras.
FusedVoxelSet fuse_scene(const VoxelSet& voxels, const std::vector<std::optional<FeaturePyramid>>& pyramids,
                         const CameraRig& rig, const DeformCafaParams& params, const DropoutMask& mask,
                         const FuseOptions& options = {});

// DCFA: versioned binary params file, layout in docs/formats.md.
void write_params(std::ostream& os, const DeformCafaParams& params);
DeformCafaParams read_params(std::istream& is);
void save_params(const std::string& path, const DeformCafaParams& params);
DeformCafaParams load_params(const std::string& path);

// FUSD: fused voxel set, layout in docs/formats.md.
void write_fused(std::ostream& os, const FusedVoxelSet& fused);
void save_fused(const std::string& path, const FusedVoxelSet& fused);

}  // namespace deformfuse
