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

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "deformfuse/augmentation.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"
#include "deformfuse/scenegen.hpp"
#include "test_util.hpp"

using namespace deformfuse;

namespace {

SceneConfig small_scene() {
  SceneConfig sc;
  sc.box_count = 5;
  sc.points_per_box = 100;
  sc.ground_points = 200;
  return sc;
}

}  // namespace

TEST(SceneIo, RoundTripIsExact) {
  testutil::TempDir dir("scene");
  const auto scene = generate_scene(100, small_scene());
  save_scene(dir.str("s"), scene);
  for (const char* f : {"cloud.pcld", "calib.txt", "annotations.csv", "cam_0.fmap", "cam_5.fmap"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "s" / f)) << f;
  }
  EXPECT_EQ(load_scene(dir.str("s")), scene);
}

TEST(SceneIo, MissingDirectoryThrows) {
  EXPECT_THROW(load_scene("/nonexistent/deformfuse/scene"), FormatError);
}

TEST(GtDatabaseIo, RoundTripIsExact) {
  testutil::TempDir dir("gtdb");
  const std::vector<SceneSample> scenes{generate_scene(101, small_scene()), generate_scene(102, small_scene())};
  const auto db = build_gt_database(scenes);
  ASSERT_GT(db.size(), 0u);
  save_gt_database(dir.str("db"), db);
  const auto back = load_gt_database(dir.str("db"));
  ASSERT_EQ(back.categories.size(), db.categories.size());
  for (const auto& [cat, objs] : db.categories) {
    const auto& other = back.categories.at(cat);
    ASSERT_EQ(other.size(), objs.size());
    for (std::size_t i = 0; i < objs.size(); ++i) {
      EXPECT_EQ(other[i].points, objs[i].points);
      EXPECT_EQ(other[i].patch, objs[i].patch);
      EXPECT_EQ(other[i].bounds, objs[i].bounds);
      EXPECT_EQ(other[i].depth, objs[i].depth);
      EXPECT_EQ(other[i].camera_index, objs[i].camera_index);
      EXPECT_EQ(other[i].color, objs[i].color);
      EXPECT_EQ(other[i].box.center, objs[i].box.center);
      EXPECT_EQ(other[i].box.yaw, objs[i].box.yaw);
    }
  }
  EXPECT_NO_THROW(back.validate());
}

TEST(FusedIo, LayoutMatchesDocumentedSizes) {
  FusedVoxelSet f;
  f.voxels.feature_width = 4;
  Voxel v;
  v.cell = {1, 2, 3};
  v.feature = {1, 2, 3, 4};
  v.point_count = 2;
  f.voxels.voxels = {v, v};
  f.fused = {v.feature, v.feature};
  f.source = {std::nullopt, 3};
  f.image_norm = {0, 0};
  std::ostringstream os;
  write_fused(os, f);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, 4), "FUSD");
  const std::size_t per_voxel = 3 * 4 + 3 * 8 + 4 + 4 + 2 * 4 * 8;
  EXPECT_EQ(s.size(), 16 + 2 * per_voxel);
  std::int32_t source = 0;
  std::memcpy(&source, s.data() + 16 + 12 + 24 + 4, 4);
  EXPECT_EQ(source, -1);
  std::memcpy(&source, s.data() + 16 + per_voxel + 12 + 24 + 4, 4);
  EXPECT_EQ(source, 3);
}
