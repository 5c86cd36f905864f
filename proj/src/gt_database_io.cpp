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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "deformfuse/augmentation.hpp"
#include "deformfuse/errors.hpp"

namespace deformfuse {

namespace fs = std::filesystem;

namespace {

std::string object_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return buf;
}

void write_meta(const fs::path& path, const GtObject& o) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << std::setprecision(17);
  os << "category " << o.category << '\n';
  os << "depth " << o.depth << '\n';
  os << "camera " << o.camera_index << '\n';
  os << "bounds " << o.bounds.x0 << ' ' << o.bounds.y0 << ' ' << o.bounds.x1 << ' ' << o.bounds.y1 << '\n';
  os << "box " << o.box.center.x() << ' ' << o.box.center.y() << ' ' << o.box.center.z() << ' ' << o.box.size.x() << ' '
     << o.box.size.y() << ' ' << o.box.size.z() << ' ' << o.box.yaw << '\n';
  os << "color " << o.color[0] << ' ' << o.color[1] << ' ' << o.color[2] << '\n';
}

void read_meta(const fs::path& path, GtObject& o) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::string raw;
  int seen = 0;
  while (std::getline(is, raw)) {
    std::istringstream line(raw);
    std::string key;
    if (!(line >> key)) continue;
    bool ok = true;
    if (key == "category") {
      ok = static_cast<bool>(line >> o.category);
    } else if (key == "depth") {
      ok = static_cast<bool>(line >> o.depth);
    } else if (key == "camera") {
      ok = static_cast<bool>(line >> o.camera_index);
    } else if (key == "bounds") {
      ok = static_cast<bool>(line >> o.bounds.x0 >> o.bounds.y0 >> o.bounds.x1 >> o.bounds.y1);
    } else if (key == "box") {
      ok = static_cast<bool>(line >> o.box.center.x() >> o.box.center.y() >> o.box.center.z() >> o.box.size.x() >>
                             o.box.size.y() >> o.box.size.z() >> o.box.yaw);
    } else if (key == "color") {
      ok = static_cast<bool>(line >> o.color[0] >> o.color[1] >> o.color[2]);
    } else {
      throw FormatError(path.string() + ": unknown key '" + key + "'");
    }
    if (!ok) throw FormatError(path.string() + ": bad value for '" + key + "'");
    ++seen;
  }
  if (seen != 6) throw FormatError(path.string() + ": incomplete metadata");
}

}  // namespace

void save_gt_database(const std::string& dir, const GtDatabase& db) {
  for (const auto& [name, objects] : db.categories) {
    const fs::path cat_dir = fs::path(dir) / name;
    fs::create_directories(cat_dir);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto stem = object_stem(i);
      save_pcld((cat_dir / (stem + ".pcld")).string(), objects[i].points);
      save_fmap((cat_dir / (stem + ".fmap")).string(), objects[i].patch);
      write_meta(cat_dir / (stem + ".meta"), objects[i]);
    }
  }
}

GtDatabase load_gt_database(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError("GT database directory not found: " + dir);
  GtDatabase db;
  std::vector<fs::path> cat_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) cat_dirs.push_back(entry.path());
  }
  std::sort(cat_dirs.begin(), cat_dirs.end());
  for (const auto& cat_dir : cat_dirs) {
    std::vector<GtObject> objects;
    for (std::size_t i = 0;; ++i) {
      const auto stem = object_stem(i);
      if (!fs::exists(cat_dir / (stem + ".meta"))) break;
      GtObject o;
      read_meta(cat_dir / (stem + ".meta"), o);
      o.points = load_pcld((cat_dir / (stem + ".pcld")).string());
      o.patch = load_fmap((cat_dir / (stem + ".fmap")).string());
      try {
        o.validate();
      } catch (const InvalidInput& e) {
        throw FormatError((cat_dir / stem).string() + ": " + e.what());
      }
      objects.push_back(std::move(o));
    }
    if (!objects.empty()) db.categories[cat_dir.filename().string()] = std::move(objects);
  }
  return db;
}

}  // namespace deformfuse
