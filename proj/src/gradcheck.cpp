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

#include "deformfuse/gradcheck.hpp"

#include <cmath>

namespace deformfuse {

namespace {

double loss(std::span<const MapView> levels, std::span<const PixelCoord> refs, std::span<const double> voxel,
            const DeformCafaParams& params, std::span<const double> upstream) {
  const Vec out = deform_cafa(levels, refs, voxel, params);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += upstream[i] * out[i];
  return s;
}

Vec flatten(const LinearLayer& layer) {
  Vec v(layer.weight);
  v.insert(v.end(), layer.bias.begin(), layer.bias.end());
  return v;
}

void unflatten(std::span<const double> v, LinearLayer& layer) {
  std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(layer.weight.size()), layer.weight.begin());
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(layer.weight.size()), v.end(), layer.bias.begin());
}

bool away_from_grid(double v, double margin) {
  const double frac = v - std::floor(v);
  return frac >= margin && frac <= 1.0 - margin;
}

}  // namespace

std::vector<GroupCheck> check_deform_gradients(std::span<const MapView> levels, std::span<const PixelCoord> references,
                                               std::span<const double> voxel_feature, const DeformCafaParams& params,
                                               std::span<const double> upstream, double step, double analytic_scale) {
  const DeformCafaGrads grads = deform_cafa_backward(levels, references, voxel_feature, params, upstream);
  std::vector<GroupCheck> out;

  // Weights: perturb a private copy of the parameters layer by layer.
  DeformCafaParams probe = params;
  std::vector<std::pair<std::string, LinearLayer*>> probe_layers;
  probe.for_each_layer([&](const std::string& name, LinearLayer& layer) { probe_layers.emplace_back(name, &layer); });
  std::vector<const LinearLayer*> grad_layers;
  grads.params.for_each_layer([&](const std::string&, const LinearLayer& layer) { grad_layers.push_back(&layer); });

  for (std::size_t g = 0; g < probe_layers.size(); ++g) {
    auto& [name, layer] = probe_layers[g];
    const LinearLayer original = *layer;
    Vec analytic = flatten(*grad_layers[g]);
    if (name == "offset_net") {
      for (auto& a : analytic) a *= analytic_scale;
    }
    const auto f = [&](std::span<const double> x) {
      unflatten(x, *layer);
      return loss(levels, references, voxel_feature, probe, upstream);
    };
    out.push_back(GroupCheck{name, finite_diff_check(f, flatten(original), analytic, step)});
    *layer = original;
  }

  // Feature maps: rebuild the level view over the perturbed buffer.
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<MapView> probe_levels(levels.begin(), levels.end());
    const auto f = [&](std::span<const double> x) {
      probe_levels[l].data = x;
      return loss(probe_levels, references, voxel_feature, params, upstream);
    };
    out.push_back(GroupCheck{"level[" + std::to_string(l) + "]",
                             finite_diff_check(f, levels[l].data, grads.levels[l], step)});
  }

  const auto fv = [&](std::span<const double> x) { return loss(levels, references, x, params, upstream); };
  out.push_back(GroupCheck{"voxel_feature", finite_diff_check(fv, voxel_feature, grads.voxel_feature, step)});
  return out;
}

bool sampling_is_smooth(std::span<const MapView> levels, std::span<const PixelCoord> references,
                        std::span<const double> voxel_feature, const DeformCafaParams& params, double margin) {
  if (!away_from_grid(references[0].x, margin) || !away_from_grid(references[0].y, margin)) return false;
  const Vec image = bilinear_sample(levels[0], references[0].x, references[0].y);
  const auto token = make_token(image, voxel_feature, params);
  const Vec offsets = sampling_offsets(token, params);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (std::size_t i = 0; i + 1 < offsets.size(); i += 2) {
      if (!away_from_grid(references[l].x + offsets[i], margin) ||
          !away_from_grid(references[l].y + offsets[i + 1], margin)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace deformfuse
