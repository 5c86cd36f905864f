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

#include <fstream>
#include <iomanip>
#include <sstream>

#include "deformfuse/errors.hpp"
#include "deformfuse/geometry.hpp"

namespace deformfuse {

namespace {

template <typename Matrix>
void write_matrix(std::ostream& os, const char* key, const Matrix& m) {
  os << "  " << key;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) os << ' ' << m(r, c);
  }
  os << '\n';
}

template <typename Matrix>
void read_matrix(std::istringstream& line, Matrix& m, const std::string& key) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!(line >> m(r, c))) throw FormatError("calibration: short row-major matrix for '" + key + "'");
    }
  }
}

}  // namespace

void write_calibration(std::ostream& os, const CameraRig& rig) {
  os << std::setprecision(17);
  os << "# deformfuse calibration v1\n";
  os << "cameras " << rig.cameras.size() << '\n';
  os << "priority";
  for (int p : rig.priority) os << ' ' << p;
  os << '\n';
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    const auto& cam = rig.cameras[i];
    os << "camera " << i << '\n';
    os << "  width " << cam.image_width << '\n';
    os << "  height " << cam.image_height << '\n';
    write_matrix(os, "rect_rot", cam.rect_rot);
    write_matrix(os, "intrinsics", cam.intrinsics);
    write_matrix(os, "cam_from_lidar", cam.cam_from_lidar);
    os << "end\n";
  }
}

CameraRig read_calibration(std::istream& is) {
  CameraRig rig;
  std::size_t declared = 0;
  bool have_count = false;
  CameraCalibration* current = nullptr;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::istringstream line(raw);
    std::string key;
    if (!(line >> key)) continue;
    const auto where = " (line " + std::to_string(line_no) + ")";
    if (key == "cameras") {
      if (!(line >> declared)) throw FormatError("calibration: bad camera count" + where);
      have_count = true;
    } else if (key == "priority") {
      int p = 0;
      while (line >> p) rig.priority.push_back(p);
    } else if (key == "camera") {
      std::size_t idx = 0;
      if (!(line >> idx) || idx != rig.cameras.size()) throw FormatError("calibration: cameras must be listed in order" + where);
      rig.cameras.emplace_back();
      current = &rig.cameras.back();
    } else if (key == "end") {
      current = nullptr;
    } else {
      if (current == nullptr) throw FormatError("calibration: '" + key + "' outside a camera section" + where);
      if (key == "width") {
        if (!(line >> current->image_width)) throw FormatError("calibration: bad width" + where);
      } else if (key == "height") {
        if (!(line >> current->image_height)) throw FormatError("calibration: bad height" + where);
      } else if (key == "rect_rot") {
        read_matrix(line, current->rect_rot, key);
      } else if (key == "intrinsics") {
        read_matrix(line, current->intrinsics, key);
      } else if (key == "cam_from_lidar") {
        read_matrix(line, current->cam_from_lidar, key);
      } else {
        throw FormatError("calibration: unknown key '" + key + "'" + where);
      }
    }
  }
  if (!have_count || declared != rig.cameras.size()) throw FormatError("calibration: camera count mismatch");
  try {
    rig.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("calibration: ") + e.what());
  }
  return rig;
}

void save_calibration(const std::string& path, const CameraRig& rig) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_calibration(os, rig);
}

CameraRig load_calibration(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return read_calibration(is);
}

}  // namespace deformfuse
