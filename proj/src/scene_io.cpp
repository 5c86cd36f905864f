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

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "deformfuse/errors.hpp"
#include "deformfuse/scenegen.hpp"

namespace deformfuse {

namespace fs = std::filesystem;

void save_scene(const std::string& dir, const SceneSample& scene) {
  fs::create_directories(dir);
  save_pcld((fs::path(dir) / "cloud.pcld").string(), scene.cloud);
  save_calibration((fs::path(dir) / "calib.txt").string(), scene.rig);
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    save_fmap((fs::path(dir) / ("cam_" + std::to_string(i) + ".fmap")).string(), scene.images[i]);
  }
  std::ofstream os(fs::path(dir) / "annotations.csv");
  if (!os) throw FormatError("cannot write annotations.csv in " + dir);
  os << "category,cx,cy,cz,sx,sy,sz,yaw,r,g,b\n" << std::setprecision(17);
  for (const auto& a : scene.annotations) {
    os << a.category << ',' << a.box.center.x() << ',' << a.box.center.y() << ',' << a.box.center.z() << ','
       << a.box.size.x() << ',' << a.box.size.y() << ',' << a.box.size.z() << ',' << a.box.yaw << ',' << a.color[0]
       << ',' << a.color[1] << ',' << a.color[2] << '\n';
  }
}

SceneSample load_scene(const std::string& dir) {
  SceneSample scene;
  scene.cloud = load_pcld((fs::path(dir) / "cloud.pcld").string());
  scene.rig = load_calibration((fs::path(dir) / "calib.txt").string());
  for (std::size_t i = 0; i < scene.rig.size(); ++i) {
    auto image = load_fmap((fs::path(dir) / ("cam_" + std::to_string(i) + ".fmap")).string());
    if (image.height() != scene.rig.cameras[i].image_height || image.width() != scene.rig.cameras[i].image_width) {
      throw FormatError("scene: image " + std::to_string(i) + " does not match its calibration");
    }
    scene.images.push_back(std::move(image));
  }
  std::ifstream is(fs::path(dir) / "annotations.csv");
  if (!is) throw FormatError("cannot open annotations.csv in " + dir);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw FormatError("annotations.csv: expected 11 columns");
    Annotation a;
    a.category = cells[0];
    try {
      a.box.center = Eigen::Vector3d(std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]));
      a.box.size = Eigen::Vector3d(std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6]));
      a.box.yaw = std::stod(cells[7]);
      for (int c = 0; c < 3; ++c) a.color[c] = std::stod(cells[8 + c]);
    } catch (const std::exception&) {
      throw FormatError("annotations.csv: bad number");
    }
    if (!a.box.valid()) throw FormatError("annotations.csv: invalid box");
    scene.annotations.push_back(a);
  }
  return scene;
}

}  // namespace deformfuse
