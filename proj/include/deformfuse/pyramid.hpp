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

// Multi-level feature pyramids built by 2x2 average pooling.

#include <vector>

#include "deformfuse/tensor.hpp"

namespace deformfuse {

struct FeaturePyramid {
  std::vector<FeatureMap> levels;
  std::vector<double> scales;  // relative to level 0; scales[0] == 1

  /// Level l must be ceil(level-0 dims * scale_l) with constant channels.
  void validate() const;
  std::vector<MapView> views() const;
  std::size_t size() const { return levels.size(); }
};

/// Level 0 is `image`; each further level averages non-overlapping 2x2
/// windows of the previous one. Odd edges use the truncated window (the
/// average of the 1 or 2 pixels present), so level dims are ceil(dims / 2).
FeaturePyramid generate_pyramid(const FeatureMap& image, int levels);

}  // namespace deformfuse
