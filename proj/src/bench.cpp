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

#include "deformfuse/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include <json.hpp>

#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"

namespace deformfuse {

void SweepConfig::validate() const {
  if (sizes.empty()) throw InvalidInput("SweepConfig: no sizes");
  for (const auto& [h, w] : sizes) {
    if (h < 1 || w < 1) throw InvalidInput("SweepConfig: map sizes must be positive");
  }
  if (heads < 1 || points < 1 || channels < 1) throw InvalidInput("SweepConfig: heads, points, channels must be >= 1");
  if (reps < 10) throw InvalidInput("SweepConfig: at least 10 repetitions are required");
  if (warmup < 1) throw InvalidInput("SweepConfig: at least one warm-up iteration is required");
}

TimingStats summarize_timings(std::vector<double> samples) {
  if (samples.empty()) throw InvalidInput("summarize_timings: no samples");
  std::sort(samples.begin(), samples.end());
  const auto quantile = [&](double q) {
    const double pos = q * (samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (pos - lo) * (samples[hi] - samples[lo]);
  };
  return TimingStats{quantile(0.5), quantile(0.75) - quantile(0.25)};
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double seconds(Fn&& fn) {
  const auto t0 = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Runs `fn` until the timing samples are collected; returns result metadata.
template <typename Fn>
BenchResult time_operator(const std::string& name, int h, int w, const SweepConfig& cfg, Fn&& fn) {
  BenchResult r;
  r.op = name;
  r.height = h;
  r.width = w;
  r.voxels = cfg.voxels;
  r.heads = cfg.heads;
  r.points = cfg.points;
  r.reps = cfg.reps;
  r.degenerate = cfg.voxels == 0;

  Vec out;
  double single = 0.0;
  for (int i = 0; i < cfg.warmup; ++i) single = seconds([&] { out = fn(); });
  r.finite = all_finite(out);
  if (single < cfg.min_sample_seconds) {
    r.inner_iterations = static_cast<int>(std::ceil(cfg.min_sample_seconds / std::max(single, 1e-9)));
    r.inner_iterations = std::min(r.inner_iterations, 1 << 20);
  }
  std::vector<double> samples;
  samples.reserve(cfg.reps);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const double t = seconds([&] {
      for (int k = 0; k < r.inner_iterations; ++k) out = fn();
    });
    samples.push_back(t / r.inner_iterations);
  }
  r.finite = r.finite && all_finite(out);
  const auto stats = summarize_timings(samples);
  // A zero-voxel call can time at exactly 0 on coarse clocks.
  r.median_s = std::max(stats.median, 1e-12);
  r.iqr_s = stats.iqr;
  return r;
}

}  // namespace

std::vector<BenchResult> run_complexity_sweep(const SweepConfig& config) {
  config.validate();
  std::vector<BenchResult> results;
  std::mt19937_64 rng(config.seed);

  DeformCafaConfig dcfg;
  dcfg.heads = config.heads;
  dcfg.points = config.points;
  dcfg.image_channels = config.channels;
  dcfg.voxel_channels = config.channels;
  const auto deform_params = DeformCafaParams::random(dcfg, rng, 0.5, 0.5);
  DenseCafaConfig ncfg{config.channels, config.channels, config.channels, config.channels};
  const auto dense_params = DenseCafaParams::random(ncfg, rng, 0.5);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec voxel_features(config.voxels * config.channels);
  for (auto& v : voxel_features) v = 2.0 * unit(rng) - 1.0;
  // Reference positions are drawn in [0, 1)^2 once and rescaled per size so
  // every size sees the same relative layout.
  std::vector<std::pair<double, double>> unit_refs(config.voxels);
  for (auto& [u, v] : unit_refs) u = unit(rng), v = unit(rng);

  for (const auto& [h, w] : config.sizes) {
    std::vector<double> data(static_cast<std::size_t>(h) * w * config.channels);
    for (auto& v : data) v = unit(rng);
    const FeatureMap map(h, w, config.channels, std::move(data));
    const MapView view = map.view();
    std::vector<PixelCoord> refs(config.voxels);
    for (std::size_t i = 0; i < config.voxels; ++i) {
      refs[i] = PixelCoord{unit_refs[i].first * (w - 1), unit_refs[i].second * (h - 1)};
    }
    const MapView levels[1] = {view};
    const double scales[1] = {1.0};
    if (config.include_deform) {
      results.push_back(time_operator("deform_cafa", h, w, config, [&] {
        return deform_cafa_batch(levels, scales, refs, voxel_features, deform_params);
      }));
    }
    if (config.include_dense) {
      results.push_back(time_operator("dense_cafa", h, w, config, [&] {
        return dense_cafa_batch(view, voxel_features, dense_params);
      }));
    }
  }
  return results;
}

double median_for(const std::vector<BenchResult>& results, const std::string& op, int height, int width) {
  for (const auto& r : results) {
    if (r.op == op && r.height == height && r.width == width) return r.median_s;
  }
  throw InvalidInput("median_for: no result for " + op + " at " + std::to_string(height) + "x" + std::to_string(width));
}

bool ratio_monotone(const std::vector<BenchResult>& results) {
  std::map<long long, std::pair<double, double>> by_area;  // area -> (deform, dense)
  for (const auto& r : results) {
    auto& slot = by_area[static_cast<long long>(r.height) * r.width];
    (r.op == "deform_cafa" ? slot.first : slot.second) = r.median_s;
  }
  std::vector<double> ratios;
  for (const auto& [area, t] : by_area) {
    if (t.first > 0.0 && t.second > 0.0) ratios.push_back(t.second / t.first);
  }
  int inversions = 0;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    if (ratios[i] < ratios[i - 1]) ++inversions;
  }
  return inversions <= 1;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results) {
  os << "operator,h,w,N,M,K,median_s,iqr_s,reps\n";
  os << std::setprecision(9);
  for (const auto& r : results) {
    os << r.op << ',' << r.height << ',' << r.width << ',' << r.voxels << ',' << r.heads << ',' << r.points << ','
       << r.median_s << ',' << r.iqr_s << ',' << r.reps << '\n';
  }
}

std::string bench_summary_json(const std::vector<BenchResult>& results) {
  nlohmann::json j;
  j["results"] = nlohmann::json::array();
  for (const auto& r : results) {
    j["results"].push_back({{"operator", r.op},
                            {"h", r.height},
                            {"w", r.width},
                            {"N", r.voxels},
                            {"M", r.heads},
                            {"K", r.points},
                            {"median_s", r.median_s},
                            {"iqr_s", r.iqr_s},
                            {"reps", r.reps},
                            {"inner_iterations", r.inner_iterations},
                            {"degenerate", r.degenerate},
                            {"finite", r.finite}});
  }
  j["ratio_monotone"] = ratio_monotone(results);
  return j.dump(2);
}

}  // namespace deformfuse
