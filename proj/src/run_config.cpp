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

#include "deformfuse/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "deformfuse/errors.hpp"

namespace deformfuse {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigFieldError(key, "expected an integer, got '" + v + "'");
  return out;
}

int parse_int32(const std::string& key, const std::string& v) {
  const long long x = parse_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigFieldError(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigFieldError(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigFieldError(key, "expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigFieldError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(parse_double(key, p));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct KeySpec {
  std::string key;
  std::string help;
  Setter set;
};

Setter int_field(int RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_int32(k, v); };
}

Setter scene_int(int SceneConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.scene.*field = parse_int32(k, v); };
}

Setter string_field(std::string RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"seed", "master seed; every stage seed is derived from it",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
      {"out", "output directory", string_field(&RunConfig::out)},
      {"scene.cameras", "number of ring cameras", scene_int(&SceneConfig::camera_count)},
      {"scene.boxes", "number of annotated boxes", scene_int(&SceneConfig::box_count)},
      {"scene.points_per_box", "surface points per box", scene_int(&SceneConfig::points_per_box)},
      {"scene.ground_points", "ground plane points", scene_int(&SceneConfig::ground_points)},
      {"scene.image_width", "camera image width in pixels", scene_int(&SceneConfig::image_width)},
      {"scene.image_height", "camera image height in pixels", scene_int(&SceneConfig::image_height)},
      {"scene.focal", "focal length in pixels",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.scene.focal = parse_double(k, v); }},
      {"voxel.size", "voxel edge length, one value or x,y,z",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto xs = parse_doubles(k, v);
         if (xs.size() == 1) {
           c.voxel.voxel_size = Eigen::Vector3d::Constant(xs[0]);
         } else if (xs.size() == 3) {
           c.voxel.voxel_size = Eigen::Vector3d(xs[0], xs[1], xs[2]);
         } else {
           throw ConfigFieldError(k, "expected 1 or 3 values");
         }
       }},
      {"voxel.range", "xmin,ymin,zmin,xmax,ymax,zmax",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto xs = parse_doubles(k, v);
         if (xs.size() != 6) throw ConfigFieldError(k, "expected 6 values");
         c.voxel.range_min = Eigen::Vector3d(xs[0], xs[1], xs[2]);
         c.voxel.range_max = Eigen::Vector3d(xs[3], xs[4], xs[5]);
       }},
      {"aug.enabled", "pipeline pastes database objects before voxelizing",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.augment = parse_bool(k, v); }},
      {"aug.alpha", "weight kept by the underlying image when a patch is blended",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.aug.alpha = parse_double(k, v); }},
      {"aug.max_paste", "objects pasted per category",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.aug.default_max_paste = parse_int32(k, v); }},
      {"aug.max_paste.<category>", "per-category override of aug.max_paste", nullptr},
      {"aug.db_scenes", "generated scenes feeding the database", int_field(&RunConfig::db_scenes)},
      {"aug.scene", "input scene directory for augment", string_field(&RunConfig::scene_dir)},
      {"aug.db", "input database directory for augment", string_field(&RunConfig::db_dir)},
      {"fusion.params", "DCFA parameter file", string_field(&RunConfig::params_path)},
      {"fusion.heads", "attention heads", int_field(&RunConfig::heads)},
      {"fusion.points", "sampling points per head", int_field(&RunConfig::points)},
      {"fusion.keep_count", "cameras kept by image-level dropout", int_field(&RunConfig::keep_count)},
      {"fusion.levels", "feature pyramid levels", int_field(&RunConfig::pyramid_levels)},
      {"fusion.threads", "worker threads for fuse_scene", int_field(&RunConfig::threads)},
      {"bench.sizes", "feature map sizes, e.g. 64x64,128x128",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<std::pair<int, int>> sizes;
         for (const auto& item : split(v, ',')) {
           const auto x = item.find('x');
           if (x == std::string::npos) throw ConfigFieldError(k, "expected HxW, got '" + item + "'");
           sizes.emplace_back(parse_int32(k, item.substr(0, x)), parse_int32(k, item.substr(x + 1)));
         }
         c.bench.sizes = std::move(sizes);
       }},
      {"bench.voxels", "voxel queries per timing",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long n = parse_int(k, v);
         if (n < 0) throw ConfigFieldError(k, "must be non-negative");
         c.bench.voxels = static_cast<std::size_t>(n);
       }},
      {"bench.reps", "timed repetitions per point",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bench.reps = parse_int32(k, v); }},
      {"bench.heads", "attention heads",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bench.heads = parse_int32(k, v); }},
      {"bench.points", "sampling points per head",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bench.points = parse_int32(k, v); }},
      {"bench.channels", "feature channels",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bench.channels = parse_int32(k, v); }},
      {"bench.dense", "include the dense baseline",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bench.include_dense = parse_bool(k, v); }},
  };
  return table;
}

template <typename Fn>
void wrap(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigFieldError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigFieldError(field, e.what());
  }
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  static const std::string per_category = "aug.max_paste.";
  if (key.rfind(per_category, 0) == 0 && key.size() > per_category.size()) {
    config.aug.max_paste[key.substr(per_category.size())] = parse_int32(key, value);
    return;
  }
  for (const auto& spec : key_table()) {
    if (spec.key == key && spec.set) {
      spec.set(config, key, value);
      return;
    }
  }
  throw ConfigFieldError(key, "unknown key");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw ConfigFieldError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFieldError("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& spec : key_table()) out.emplace_back(spec.key, spec.help);
  return out;
}

void RunConfig::validate() const {
  if (out.empty()) throw ConfigFieldError("out", "must not be empty");
  wrap("scene", [&] { scene.validate(); });
  wrap("voxel", [&] { voxel.validate(); });
  if (!(aug.alpha > 0.0 && aug.alpha <= 1.0)) throw ConfigFieldError("aug.alpha", "must lie in (0, 1]");
  if (aug.default_max_paste < 0) throw ConfigFieldError("aug.max_paste", "must be non-negative");
  for (const auto& [cat, n] : aug.max_paste) {
    if (n < 0) throw ConfigFieldError("aug.max_paste." + cat, "must be non-negative");
  }
  if (db_scenes < 1) throw ConfigFieldError("aug.db_scenes", "must be at least 1");
  if (heads < 1) throw ConfigFieldError("fusion.heads", "must be at least 1");
  if (points < 1) throw ConfigFieldError("fusion.points", "must be at least 1");
  if (keep_count < 0 || keep_count > scene.camera_count) {
    throw ConfigFieldError("fusion.keep_count", "must lie in [0, scene.cameras]");
  }
  if (pyramid_levels < 1) throw ConfigFieldError("fusion.levels", "must be at least 1");
  if (threads < 1) throw ConfigFieldError("fusion.threads", "must be at least 1");
  if (bench.sizes.empty()) throw ConfigFieldError("bench.sizes", "must not be empty");
  for (const auto& [h, w] : bench.sizes) {
    if (h < 1 || w < 1) throw ConfigFieldError("bench.sizes", "sizes must be positive");
  }
  if (bench.reps < 10) throw ConfigFieldError("bench.reps", "must be at least 10");
  if (bench.heads < 1) throw ConfigFieldError("bench.heads", "must be at least 1");
  if (bench.points < 1) throw ConfigFieldError("bench.points", "must be at least 1");
  if (bench.channels < 1) throw ConfigFieldError("bench.channels", "must be at least 1");
}

}  // namespace deformfuse
