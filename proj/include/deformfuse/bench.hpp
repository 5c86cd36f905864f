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

// Timing sweep of the dense and deformable operators over feature-map sizes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace deformfuse {

struct BenchResult {
  std::string op;  // "deform_cafa" or "dense_cafa"
  int height = 0;
  int width = 0;
  std::size_t voxels = 0;
  int heads = 0;
  int points = 0;
  double median_s = 0.0;
  double iqr_s = 0.0;
  int reps = 0;
  int inner_iterations = 1;  // > 1 when a single call was below the timer floor
  bool degenerate = false;   // zero-voxel workload, timing is timer noise
  bool finite = true;        // every output value finite
};

struct SweepConfig {
  std::vector<std::pair<int, int>> sizes{{64, 64}, {128, 128}, {256, 256}, {512, 512}};
  std::size_t voxels = 10000;
  int heads = 4;
  int points = 8;
  int channels = 8;
  int reps = 10;
  int warmup = 1;
  double min_sample_seconds = 2e-3;
  bool include_dense = true;
  bool include_deform = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TimingStats {
  double median = 0.0;
  double iqr = 0.0;
};

/// Median and interquartile range (linear interpolation between order statistics).
TimingStats summarize_timings(std::vector<double> samples);

/// Both operators timed on identical random inputs per size, deformable first.
std::vector<BenchResult> run_complexity_sweep(const SweepConfig& config);

/// Median time of `op` at the given size; throws if absent.
double median_for(const std::vector<BenchResult>& results, const std::string& op, int height, int width);

/// dense/deform ratio non-decreasing in map area, allowing one inversion.
bool ratio_monotone(const std::vector<BenchResult>& results);

/// `operator,h,w,N,M,K,median_s,iqr_s,reps`
void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results);
std::string bench_summary_json(const std::vector<BenchResult>& results);

}  // namespace deformfuse
