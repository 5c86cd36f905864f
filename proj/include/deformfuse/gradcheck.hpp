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

// Finite-difference verification of the DeformCAFA backward pass, one
// report per parameter group.

#include <span>
#include <string>
#include <vector>

#include "deformfuse/fusion.hpp"

namespace deformfuse {

struct GroupCheck {
  std::string group;  // layer name, "level[l]" or "voxel_feature"
  GradCheckReport report;
};

/// Compares deform_cafa_backward against central differences of the scalar
/// loss <upstream, deform_cafa(...)> for every layer, every pyramid level and
/// the voxel feature. `analytic_scale` multiplies the analytic offset_net
/// gradient (1 in normal use; other values inject a fault).
std::vector<GroupCheck> check_deform_gradients(std::span<const MapView> levels, std::span<const PixelCoord> references,
                                               std::span<const double> voxel_feature, const DeformCafaParams& params,
                                               std::span<const double> upstream, double step = 1e-5,
                                               double analytic_scale = 1.0);

/// True when every bilinear sample the operator takes (the level-0 token
/// sample and all offset samples) sits at least `margin` pixels away from
/// integer grid lines, where bilinear interpolation is not differentiable.
bool sampling_is_smooth(std::span<const MapView> levels, std::span<const PixelCoord> references,
                        std::span<const double> voxel_feature, const DeformCafaParams& params, double margin);

}  // namespace deformfuse
