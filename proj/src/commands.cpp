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

#include "deformfuse/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "deformfuse/bench.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/seed.hpp"
#include "deformfuse/selftest.hpp"

namespace deformfuse {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kImageChannels = 3;

template <typename Fn>
auto stage(const std::string& name, StageTimings& timings, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto finish = [&] {
    timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError("stage '" + name + "': " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

GtDatabase database_from_generated(const RunConfig& cfg) {
  std::vector<SceneSample> scenes;
  const std::uint64_t base = derive_seed(cfg.seed, SeedStream::kDatabase);
  for (int i = 0; i < cfg.db_scenes; ++i) {
    scenes.push_back(generate_scene(derive_seed(base, static_cast<std::uint64_t>(i)), cfg.scene));
  }
  return build_gt_database(scenes);
}

DeformCafaParams pipeline_params(const RunConfig& cfg, int voxel_width) {
  DeformCafaConfig dc;
  dc.heads = cfg.heads;
  dc.points = cfg.points;
  dc.image_channels = kImageChannels;
  dc.voxel_channels = voxel_width;
  if (cfg.params_path.empty()) {
    std::mt19937_64 rng(derive_seed(cfg.seed, SeedStream::kParams));
    return DeformCafaParams::initial(dc, rng);
  }
  DeformCafaParams p;
  try {
    p = load_params(cfg.params_path);
  } catch (const std::exception& e) {
    throw ConfigFieldError("fusion.params", e.what());
  }
  if (p.config.image_channels != kImageChannels || p.config.voxel_channels != voxel_width) {
    throw ConfigFieldError("fusion.params", "expected d=" + std::to_string(kImageChannels) +
                                                " c=" + std::to_string(voxel_width) + ", file has d=" +
                                                std::to_string(p.config.image_channels) +
                                                " c=" + std::to_string(p.config.voxel_channels));
  }
  return p;
}

std::string metrics_json(const RunConfig& cfg, const PipelineOutput& out, const VoxelConfig& vc) {
  const auto& voxels = out.fused.voxels;
  const std::size_t n = voxels.size();
  const int cams = static_cast<int>(out.scene.rig.size());

  std::vector<std::size_t> per_camera(cams, 0);
  std::size_t in_view = 0, points_in_range = 0;
  for (const auto& v : voxels.voxels) {
    points_in_range += static_cast<std::size_t>(v.point_count);
    if (const auto hit = select_camera(out.scene.rig, v.center)) {
      ++in_view;
      ++per_camera[hit->camera_index];
    }
  }
  const auto frac = [n](std::size_t k) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };

  Json j;
  j["schema_version"] = 1;
  j["seed"] = cfg.seed;
  j["scene"] = {{"cameras", cams},
                {"points", out.scene.cloud.size()},
                {"annotations", out.scene.annotations.size()},
                {"pasted_objects", out.pasted}};
  const auto dims = vc.grid_dims();
  j["voxelization"] = {{"voxels", n},
                       {"points_in_range", points_in_range},
                       {"feature_width", voxels.feature_width},
                       {"grid", {dims[0], dims[1], dims[2]}}};
  Json per = Json::array();
  for (int c = 0; c < cams; ++c) per.push_back(frac(per_camera[c]));
  j["in_view"] = {{"voxels", in_view}, {"fraction", frac(in_view)}, {"per_camera", per}};

  Json kept = Json::array();
  for (int c = 0; c < cams; ++c) {
    if (out.mask.keep[c]) kept.push_back(c);
  }
  j["dropout"] = {{"keep_count", cfg.keep_count}, {"kept_cameras", kept}};

  std::vector<std::size_t> hist(cams, 0);
  std::size_t point_only = 0;
  for (const auto& s : out.fused.source) {
    if (s) {
      ++hist[*s];
    } else {
      ++point_only;
    }
  }
  Json prov;
  prov["point_only"] = point_only;
  for (int c = 0; c < cams; ++c) prov["camera_" + std::to_string(c)] = hist[c];
  j["provenance"] = prov;

  double mn = 0.0, mx = 0.0, sum = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < out.fused.image_norm.size(); ++i) {
    const double v = out.fused.image_norm[i];
    mn = i == 0 ? v : std::min(mn, v);
    mx = i == 0 ? v : std::max(mx, v);
    sum += v;
    nonzero += v != 0.0;
  }
  j["image_contribution_norm"] = {
      {"min", mn}, {"max", mx}, {"mean", n ? sum / static_cast<double>(n) : 0.0}, {"nonzero_voxels", nonzero}};
  j["fused_checksum"] = fnv1a_hex(out.fused_bytes);
  return j.dump(2) + "\n";
}

std::string timing_json(const PipelineOutput& out) {
  Json stages;
  double image_branch = 0.0;
  for (const auto& [name, s] : out.timings) {
    stages[name] = s;
    if (name == "pyramids" || name == "fuse") image_branch += s;
  }
  Json j;
  j["stages_s"] = stages;
  j["image_branch_s"] = image_branch;
  j["kept_cameras"] = out.mask.kept_count();
  return j.dump(2) + "\n";
}

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw ConfigFieldError("out", "cannot create '" + cfg.out + "': " + ec.message());
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineOutput run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const int voxel_width = 1 + 3;
  const DeformCafaParams params = pipeline_params(cfg, voxel_width);
  if (cfg.params_path.empty()) params.validate();

  PipelineOutput out;
  out.scene = stage("generate_scene", out.timings,
                    [&] { return generate_scene(derive_seed(cfg.seed, SeedStream::kScene), cfg.scene); });
  if (cfg.augment) {
    stage("augment", out.timings, [&] {
      const GtDatabase db = database_from_generated(cfg);
      auto result = depth_aware_gt_aug_detailed(out.scene, db, cfg.aug, derive_seed(cfg.seed, SeedStream::kAugment));
      out.pasted = result.pasted.size();
      out.scene = std::move(result.scene);
    });
  }
  const VoxelSet voxels = stage("voxelize", out.timings, [&] { return voxelize(out.scene.cloud, cfg.voxel); });
  out.mask = stage("dropout", out.timings, [&] {
    return make_dropout_mask(static_cast<int>(out.scene.rig.size()), cfg.keep_count,
                             derive_seed(cfg.seed, SeedStream::kDropout));
  });
  const auto pyramids = stage("pyramids", out.timings, [&] {
    std::vector<std::optional<FeaturePyramid>> p(out.scene.rig.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (out.mask.keep[c]) p[c] = generate_pyramid(out.scene.images[c], cfg.pyramid_levels);
    }
    return p;
  });
  out.fused = stage("fuse", out.timings, [&] {
    FuseOptions opts;
    opts.threads = cfg.threads;
    return fuse_scene(voxels, pyramids, out.scene.rig, params, out.mask, opts);
  });
  std::ostringstream fused;
  write_fused(fused, out.fused);
  out.fused_bytes = fused.str();
  out.metrics_json = metrics_json(cfg, out, cfg.voxel);
  out.timing_json = timing_json(out);
  return out;
}

AugmentOutput run_augment(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.scene_dir.empty() && !fs::is_directory(cfg.scene_dir)) {
    throw ConfigFieldError("aug.scene", "no such directory '" + cfg.scene_dir + "'");
  }
  if (!cfg.db_dir.empty() && !fs::is_directory(cfg.db_dir)) {
    throw ConfigFieldError("aug.db", "no such directory '" + cfg.db_dir + "'");
  }
  StageTimings t;
  AugmentOutput out;
  out.input = stage("load_scene", t, [&] {
    return cfg.scene_dir.empty() ? generate_scene(derive_seed(cfg.seed, SeedStream::kScene), cfg.scene)
                                 : load_scene(cfg.scene_dir);
  });
  const GtDatabase db =
      stage("load_database", t, [&] { return cfg.db_dir.empty() ? database_from_generated(cfg) : load_gt_database(cfg.db_dir); });
  out.result = stage("augment", t, [&] {
    return depth_aware_gt_aug_detailed(out.input, db, cfg.aug, derive_seed(cfg.seed, SeedStream::kAugment));
  });
  return out;
}

GtDatabase run_gtdb(const RunConfig& cfg) {
  cfg.validate();
  StageTimings t;
  return stage("build_database", t, [&] { return database_from_generated(cfg); });
}

int cmd_selftest(const RunConfig& cfg, const std::string& inject_fault, std::ostream& out) {
  SelftestOptions opts;
  opts.seed = cfg.seed;
  opts.inject_fault = inject_fault;
  const auto report = run_selftest(opts);
  out << report.table();
  return report.all_passed() ? kExitOk : kExitFailure;
}

int cmd_pipeline(const RunConfig& cfg, std::ostream& out) {
  const PipelineOutput result = run_pipeline(cfg);
  prepare_out_dir(cfg);
  const fs::path dir(cfg.out);
  write_file(dir / "fused.bin", result.fused_bytes);
  write_file(dir / "metrics.json", result.metrics_json);
  write_file(dir / "metrics_timing.json", result.timing_json);
  out << "voxels " << result.fused.voxels.size() << ", kept cameras " << result.mask.kept_count() << ", checksum "
      << fnv1a_hex(result.fused_bytes) << '\n';
  out << "wrote " << (dir / "fused.bin").string() << ", metrics.json, metrics_timing.json\n";
  return kExitOk;
}

int cmd_augment(const RunConfig& cfg, std::ostream& out) {
  const AugmentOutput result = run_augment(cfg);
  prepare_out_dir(cfg);
  const fs::path dir(cfg.out);
  save_scene((dir / "input").string(), result.input);
  save_scene((dir / "augmented").string(), result.result.scene);
  std::ostringstream csv;
  csv << "category,database_index,camera,x0,y0,x1,y1,depth\n";
  char depth[32];
  for (const auto& p : result.result.pasted) {
    std::snprintf(depth, sizeof(depth), "%.17g", p.depth);
    csv << p.category << ',' << p.database_index << ',' << p.camera_index << ',' << p.bounds.x0 << ','
        << p.bounds.y0 << ',' << p.bounds.x1 << ',' << p.bounds.y1 << ',' << depth << '\n';
  }
  write_file(dir / "pasted.csv", csv.str());
  out << "pasted " << result.result.pasted.size() << " objects; wrote " << dir.string() << "/{input,augmented}\n";
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  SweepConfig sweep = cfg.bench;
  sweep.seed = derive_seed(cfg.seed, SeedStream::kBench);
  StageTimings t;
  const auto results = stage("bench", t, [&] { return run_complexity_sweep(sweep); });
  prepare_out_dir(cfg);
  const fs::path dir(cfg.out);
  std::ostringstream csv;
  write_bench_csv(csv, results);
  write_file(dir / "bench.csv", csv.str());
  write_file(dir / "bench.json", bench_summary_json(results));
  out << csv.str();
  const bool ok = ratio_monotone(results);
  out << (ok ? "dense/deformable ratio grows with area\n" : "dense/deformable ratio is NOT monotone in area\n");
  return ok ? kExitOk : kExitNotMonotone;
}

int cmd_gtdb(const RunConfig& cfg, std::ostream& out) {
  const GtDatabase db = run_gtdb(cfg);
  db.validate();
  prepare_out_dir(cfg);
  save_gt_database(cfg.out, db);
  out << db.size() << " objects";
  for (const auto& [cat, objs] : db.categories) out << ", " << cat << ' ' << objs.size();
  out << "; wrote " << cfg.out << '\n';
  return kExitOk;
}

}  // namespace deformfuse
