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

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "deformfuse/errors.hpp"
#include "deformfuse/geometry.hpp"
#include "deformfuse/scenegen.hpp"
#include "oracles.hpp"

using namespace deformfuse;

namespace {

CameraCalibration pinhole(double f, double cx, double cy, int w, int h) {
  CameraCalibration c;
  c.intrinsics << f, 0, cx, 0, f, cy, 0, 0, 1;
  c.image_width = w;
  c.image_height = h;
  return c;
}

// Random rig: cameras at random yaws around the origin looking outward.
CameraRig random_rig(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi), f(40.0, 120.0), t(-0.5, 0.5);
  CameraRig rig;
  for (int i = 0; i < n; ++i) {
    CameraCalibration c = pinhole(f(rng), 80.0, 48.0, 160, 96);
    const double yaw = u(rng);
    // Camera axes: x right, y down, z forward. Forward = (cos, sin, 0) in the lidar frame.
    Eigen::Matrix3d r;
    r << -std::sin(yaw), std::cos(yaw), 0, 0, 0, -1, std::cos(yaw), std::sin(yaw), 0;
    c.cam_from_lidar.setIdentity();
    c.cam_from_lidar.topLeftCorner<3, 3>() = r;
    c.cam_from_lidar.topRightCorner<3, 1>() = Eigen::Vector3d(t(rng), t(rng), t(rng));
    c.rect_rot = Eigen::AngleAxisd(t(rng) * 0.02, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    rig.cameras.push_back(c);
  }
  for (int i = 0; i < n; ++i) rig.priority.push_back(i);
  std::shuffle(rig.priority.begin(), rig.priority.end(), rng);
  return rig;
}

}  // namespace

TEST(Projection, OpticalAxis) {
  const auto c = pinhole(1.0, 0.0, 0.0, 1, 1);
  const auto r = project_point(c, Eigen::Vector3d(0, 0, 1));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->pixel.x, 0.0);
  EXPECT_EQ(r->pixel.y, 0.0);
  EXPECT_EQ(r->depth, 1.0);
}

TEST(Projection, HandMultiplyExample) {
  const auto c = pinhole(100.0, 320.0, 240.0, 640, 480);
  const auto r = project_point(c, Eigen::Vector3d(1, 0, 2));
  ASSERT_TRUE(r);
  EXPECT_DOUBLE_EQ(r->pixel.x, 370.0);
  EXPECT_DOUBLE_EQ(r->pixel.y, 240.0);
  EXPECT_DOUBLE_EQ(r->depth, 2.0);
}

TEST(Projection, BehindCameraIsOutOfView) {
  const auto c = pinhole(100.0, 320.0, 240.0, 640, 480);
  EXPECT_FALSE(project_point(c, Eigen::Vector3d(0, 0, -1)));
  EXPECT_FALSE(project_point(c, Eigen::Vector3d(0, 0, 1e-10)));
}

TEST(Projection, ClosedImageBounds) {
  const auto c = pinhole(1.0, 0.0, 0.0, 11, 6);
  EXPECT_TRUE(project_point(c, Eigen::Vector3d(10, 5, 1)));
  EXPECT_TRUE(project_point(c, Eigen::Vector3d(0, 0, 1)));
  EXPECT_FALSE(project_point(c, Eigen::Vector3d(10.000001, 5, 1)));
  EXPECT_FALSE(project_point(c, Eigen::Vector3d(-1e-9, 0, 1)));
}

TEST(Projection, NonFiniteThrows) {
  const auto c = pinhole(1.0, 0.0, 0.0, 2, 2);
  EXPECT_THROW(project_point(c, Eigen::Vector3d(NAN, 0, 1)), InvalidInput);
}

TEST(Projection, ScaleEquivariant) {
  const auto c = pinhole(100.0, 320.0, 240.0, 640, 480);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), z(1.0, 5.0), lam(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d v(u(rng), u(rng), z(rng));
    const double l = lam(rng);
    const auto a = project_point(c, v), b = project_point(c, l * v);
    ASSERT_TRUE(a && b);
    EXPECT_NEAR(a->pixel.x, b->pixel.x, 1e-9);
    EXPECT_NEAR(a->pixel.y, b->pixel.y, 1e-9);
    EXPECT_NEAR(b->depth, l * a->depth, 1e-9);
  }
}

TEST(Projection, MatchesPlainArithmeticAndRoundTrips) {
  std::mt19937_64 rng(12);
  const auto rig = random_rig(rng, 5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  int seen = 0;
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d v(u(rng), u(rng), u(rng) * 0.1);
    for (const auto& cam : rig.cameras) {
      const auto r = project_point(cam, v);
      const auto o = oracle::project(cam, v);
      if (!r) continue;
      ++seen;
      ASSERT_TRUE(o);
      EXPECT_NEAR(r->pixel.x, o->x, 1e-9);
      EXPECT_NEAR(r->pixel.y, o->y, 1e-9);
      const auto back = project_point(cam, back_project(cam, r->pixel, r->depth));
      ASSERT_TRUE(back);
      EXPECT_NEAR(back->pixel.x, r->pixel.x, 1e-9);
      EXPECT_NEAR(back->pixel.y, r->pixel.y, 1e-9);
    }
  }
  EXPECT_GT(seen, 100);
}

TEST(SelectCamera, OnlyVisibleCameraWins) {
  auto rig = make_ring_rig(6, 160, 96, 80.0);
  rig.priority = {5, 4, 3, 2, 1, 0};
  // Straight along camera 3's optical axis, far enough that neighbours do not see it.
  const double yaw = 2.0 * std::numbers::pi * 3 / 6;
  const Eigen::Vector3d v(10 * std::cos(yaw), 10 * std::sin(yaw), 0.0);
  const auto hit = select_camera(rig, v);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->camera_index, 3);
}

TEST(SelectCamera, PriorityResolvesOverlap) {
  auto rig = make_ring_rig(6, 160, 96, 80.0);
  const double yaw = 2.0 * std::numbers::pi * 0.5 / 6;  // halfway between cameras 0 and 1
  const Eigen::Vector3d v(10 * std::cos(yaw), 10 * std::sin(yaw), 0.0);
  ASSERT_TRUE(project_point(rig.cameras[0], v));
  ASSERT_TRUE(project_point(rig.cameras[1], v));
  rig.priority = {1, 0, 2, 3, 4, 5};
  EXPECT_EQ(select_camera(rig, v)->camera_index, 1);
  rig.priority = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(select_camera(rig, v)->camera_index, 0);
}

TEST(SelectCamera, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int r = 0; r < 5; ++r) {
    const auto rig = random_rig(rng, 2 + r);
    for (int i = 0; i < 1000; ++i) {
      const Eigen::Vector3d v(u(rng), u(rng), u(rng) * 0.1);
      const auto hit = select_camera(rig, v);
      const auto expect = oracle::select_camera(rig, v);
      ASSERT_EQ(hit.has_value(), expect.has_value());
      if (hit) {
        EXPECT_EQ(hit->camera_index, *expect);
      }
    }
  }
}

TEST(SelectCamera, EmptyRigThrows) {
  EXPECT_THROW(select_camera(CameraRig{}, Eigen::Vector3d(1, 0, 0)), InvalidInput);
}

TEST(References, ProportionalScaling) {
  CameraRig rig;
  rig.cameras.push_back(pinhole(1.0, 0.0, 0.0, 200, 100));
  rig.priority = {0};
  const double scales[3] = {1.0, 0.5, 0.25};
  const auto refs = voxel_center_to_reference(Eigen::Vector3d(100, 60, 1), rig, scales);
  ASSERT_TRUE(refs);
  ASSERT_EQ(refs->levels.size(), 3u);
  EXPECT_EQ(refs->levels[0], (PixelCoord{100, 60}));
  EXPECT_EQ(refs->levels[1], (PixelCoord{50, 30}));
  EXPECT_EQ(refs->levels[2], (PixelCoord{25, 15}));
  EXPECT_FALSE(voxel_center_to_reference(Eigen::Vector3d(0, 0, -1), rig, scales));
}

TEST(References, MatchScaledIntrinsicsProjection) {
  std::mt19937_64 rng(14);
  const auto rig = random_rig(rng, 4);
  const double scales[3] = {1.0, 0.5, 0.25};
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d v(u(rng), u(rng), 0.0);
    const auto refs = voxel_center_to_reference(v, rig, scales);
    if (!refs) continue;
    for (int l = 0; l < 3; ++l) {
      CameraCalibration scaled = rig.cameras[refs->projection.camera_index];
      scaled.intrinsics.topRows<2>() *= scales[l];
      const auto o = oracle::project(scaled, v);
      ASSERT_TRUE(o);
      EXPECT_NEAR(refs->levels[l].x, o->x, 1e-9);
      EXPECT_NEAR(refs->levels[l].y, o->y, 1e-9);
    }
  }
}

TEST(References, BadScalesThrow) {
  CameraRig rig;
  rig.cameras.push_back(pinhole(1.0, 0.0, 0.0, 2, 2));
  rig.priority = {0};
  const double bad1[2] = {0.5, 0.25}, bad2[3] = {1.0, 0.5, 0.5};
  EXPECT_THROW(voxel_center_to_reference(Eigen::Vector3d(0, 0, 1), rig, bad1), InvalidInput);
  EXPECT_THROW(voxel_center_to_reference(Eigen::Vector3d(0, 0, 1), rig, bad2), InvalidInput);
}

TEST(Box, ContainsCornersAndRejectsOutside) {
  const Box3D b{Eigen::Vector3d(1, 2, 0), Eigen::Vector3d(4, 2, 1.5), 0.7};
  for (const auto& c : b.corners()) EXPECT_TRUE(b.contains(c, 1e-9));
  EXPECT_TRUE(b.contains(b.center));
  EXPECT_FALSE(b.contains(b.center + Eigen::Vector3d(0, 0, 0.76)));
}

TEST(Box, BevOverlapMatchesPolygonClipping) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), size(0.5, 4.0), yaw(-3.14, 3.14);
  int overlaps = 0;
  for (int i = 0; i < 3000; ++i) {
    const Box3D a{Eigen::Vector3d(pos(rng), pos(rng), 0), Eigen::Vector3d(size(rng), size(rng), 1), yaw(rng)};
    const Box3D b{Eigen::Vector3d(pos(rng), pos(rng), 0), Eigen::Vector3d(size(rng), size(rng), 1), yaw(rng)};
    const double area = oracle::bev_intersection_area(a, b);
    if (area > 1e-9 || area == 0.0) {
      EXPECT_EQ(bev_overlap(a, b), area > 0.0) << "area " << area;
      overlaps += area > 0.0;
    }
  }
  EXPECT_GT(overlaps, 100);
}

TEST(Box, TouchingBoxesDoNotOverlap) {
  const Box3D a{Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2, 2, 1), 0.0};
  const Box3D b{Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(2, 2, 1), 0.0};
  EXPECT_FALSE(bev_overlap(a, b));
  EXPECT_TRUE(bev_overlap(a, a));
}

TEST(CalibrationIo, RoundTripIsExact) {
  std::mt19937_64 rng(16);
  const auto rig = random_rig(rng, 3);
  std::stringstream ss;
  write_calibration(ss, rig);
  const auto back = read_calibration(ss);
  ASSERT_EQ(back.size(), rig.size());
  EXPECT_EQ(back.priority, rig.priority);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back.cameras[i].intrinsics, rig.cameras[i].intrinsics);
    EXPECT_EQ(back.cameras[i].rect_rot, rig.cameras[i].rect_rot);
    EXPECT_EQ(back.cameras[i].cam_from_lidar, rig.cameras[i].cam_from_lidar);
    EXPECT_EQ(back.cameras[i].image_width, rig.cameras[i].image_width);
  }
}

TEST(CalibrationIo, MalformedInputThrows) {
  std::stringstream ss("cameras 1\npriority 0\ncamera 0\n  width 10\nend\n");
  EXPECT_THROW(read_calibration(ss), FormatError);
}
