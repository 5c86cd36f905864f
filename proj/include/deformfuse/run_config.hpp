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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deformfuse/augmentation.hpp"
#include "deformfuse/bench.hpp"
#include "deformfuse/scenegen.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";

  SceneConfig scene;
  VoxelConfig voxel;
  AugConfig aug;
  bool augment = false;      // pipeline: paste database objects before voxelizing
  int db_scenes = 2;         // scenes used to build a database when none is given
  std::string scene_dir;     // augment: optional input scene
  std::string db_dir;        // augment: optional input database

  std::string params_path;   // fusion parameters (DCFA); empty means seeded initial params
  int heads = 4;
  int points = 4;
  int keep_count = 6;
  int pyramid_levels = 3;
  int threads = 1;

  SweepConfig bench;

  /// Range checks that do not touch the filesystem. Throws ConfigFieldError.
  void validate() const;
};

/// Applies one `key = value` assignment. Throws ConfigFieldError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses the key-value grammar: one `key = value` per line, `#` starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Every recognised key with a one-line description, in documentation order.
std::vector<std::pair<std::string, std::string>> config_keys();

}  // namespace deformfuse
