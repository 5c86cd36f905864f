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

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "deformfuse/augmentation.hpp"
#include "deformfuse/fusion.hpp"
#include "deformfuse/run_config.hpp"

namespace deformfuse {

/// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNotMonotone = 3;

using StageTimings = std::vector<std::pair<std::string, double>>;

struct PipelineOutput {
  SceneSample scene;
  std::size_t pasted = 0;
  DropoutMask mask;
  FusedVoxelSet fused;
  StageTimings timings;     // seconds per stage, in execution order
  std::string fused_bytes;  // FUSD encoding of `fused`
  std::string metrics_json;
  std::string timing_json;
};

/// Runs every stage in memory. Stage failures are rethrown as EvaluationError
/// prefixed with the stage name; configuration problems as ConfigFieldError.
PipelineOutput run_pipeline(const RunConfig& config);

struct AugmentOutput {
  SceneSample input;
  AugmentResult result;
};

AugmentOutput run_augment(const RunConfig& config);

GtDatabase run_gtdb(const RunConfig& config);

/// FNV-1a 64-bit digest, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

int cmd_selftest(const RunConfig& config, const std::string& inject_fault, std::ostream& out);
int cmd_pipeline(const RunConfig& config, std::ostream& out);
int cmd_augment(const RunConfig& config, std::ostream& out);
int cmd_bench(const RunConfig& config, std::ostream& out);
int cmd_gtdb(const RunConfig& config, std::ostream& out);

}  // namespace deformfuse
