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

#include <cmath>
#include <random>
#include <sstream>

#include "deformfuse/errors.hpp"
#include "deformfuse/tensor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace deformfuse;
using testutil::random_map;
using testutil::random_vec;

TEST(Bilinear, IntegerCoordinateReturnsStoredFeature) {
  std::mt19937_64 rng(1);
  const FeatureMap m = random_map(5, 6, 3, rng);
  const Vec s = bilinear_sample(m.view(), 2.0, 3.0);
  const auto stored = m.pixel(3, 2);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s[c], stored[c]);
}

TEST(Bilinear, BlockCenterIsMean) {
  const FeatureMap m(2, 2, 1, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(bilinear_sample(m.view(), 0.5, 0.5)[0], 2.5);
}

TEST(Bilinear, MatchesFourCornerOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(-2.0, 9.0), uy(-2.0, 8.0);
  for (int t = 0; t < 200; ++t) {
    const FeatureMap m = random_map(6, 7, 4, rng);
    const double x = ux(rng), y = uy(rng);
    EXPECT_LT(testutil::max_abs_diff(bilinear_sample(m.view(), x, y), oracle::bilinear(m.view(), x, y)), 1e-14);
  }
}

TEST(Bilinear, FarOutsideIsZero) {
  std::mt19937_64 rng(3);
  const FeatureMap m = random_map(4, 4, 2, rng);
  for (const auto& [x, y] : std::vector<std::pair<double, double>>{{-1.0, 0.0}, {4.0, 1.0}, {1.0, -1.5}, {9, 9}}) {
    const Vec s = bilinear_sample(m.view(), x, y);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[1], 0.0);
  }
}

TEST(Bilinear, ContinuousAcrossCellBoundaries) {
  std::mt19937_64 rng(4);
  const FeatureMap m = random_map(8, 8, 3, rng);
  for (int k = 1; k < 7; ++k) {
    const Vec a = bilinear_sample(m.view(), k - 1e-9, 3.3);
    const Vec b = bilinear_sample(m.view(), k + 1e-9, 3.3);
    EXPECT_LT(testutil::max_abs_diff(a, b), 1e-6);
  }
}

TEST(Bilinear, RejectsNonFiniteCoordinates) {
  const FeatureMap m(2, 2, 1);
  EXPECT_THROW(bilinear_sample(m.view(), std::nan(""), 0.0), InvalidInput);
  EXPECT_THROW(bilinear_sample(m.view(), 0.0, INFINITY), InvalidInput);
}

TEST(BilinearGrad, ConstantMapHasZeroCoordinateGradient) {
  const FeatureMap m(5, 5, 2, std::vector<double>(50, 0.7));
  const Vec up{1.0, -2.0};
  const auto g = bilinear_sample_grad(m.view(), 2.3, 1.6, up);
  EXPECT_EQ(g.grad_x, 0.0);
  EXPECT_EQ(g.grad_y, 0.0);
}

TEST(BilinearGrad, IntegerCoordinatePutsUnitWeightOnPixel) {
  const FeatureMap m(4, 4, 1);
  const Vec up{1.0};
  const auto g = bilinear_sample_grad(m.view(), 2.0, 1.0, up);
  Vec dense(16, 0.0);
  g.scatter(m.view(), up, dense);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(dense[i], i == 1 * 4 + 2 ? 1.0 : 0.0);
}

TEST(BilinearGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0.1, 5.9);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap m = random_map(6, 7, 3, rng);
    double x = ux(rng), y = ux(rng) * 0.8;
    if (std::abs(x - std::round(x)) < 1e-3 || std::abs(y - std::round(y)) < 1e-3) continue;
    const Vec up = random_vec(3, rng);
    const auto g = bilinear_sample_grad(m.view(), x, y, up);
    const auto loss = [&](const MapView& v, double px, double py) {
      const Vec s = bilinear_sample(v, px, py);
      return s[0] * up[0] + s[1] * up[1] + s[2] * up[2];
    };
    const double pt[2] = {x, y}, an[2] = {g.grad_x, g.grad_y};
    const auto rep = finite_diff_check([&](std::span<const double> p) { return loss(m.view(), p[0], p[1]); }, pt, an, 1e-5);
    EXPECT_LT(rep.max_relative_error, 1e-6);

    Vec dense(m.data().size(), 0.0);
    g.scatter(m.view(), up, dense);
    const auto rep_map = finite_diff_check(
        [&](std::span<const double> data) {
          MapView v = m.view();
          v.data = data;
          return loss(v, x, y);
        },
        m.data(), dense, 1e-5);
    EXPECT_LT(rep_map.max_relative_error, 1e-6);
  }
}

TEST(Linear, IdentityReturnsInput) {
  const auto l = LinearLayer::identity(5);
  const Vec x{1, -2, 3.5, 0, 7};
  EXPECT_EQ(l.forward(x), x);
}

TEST(Linear, MatchesDoubleLoop) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto l = LinearLayer::random(7, 5, rng, 1.0);
    const Vec x = random_vec(5, rng);
    EXPECT_LT(testutil::max_abs_diff(l.forward(x), oracle::affine(l, x)), 1e-14);
  }
}

TEST(Linear, DimensionMismatchThrows) {
  const auto l = LinearLayer::zeros(3, 4);
  EXPECT_THROW(l.forward(Vec(3)), InvalidInput);
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const auto l = LinearLayer::random(4, 6, rng, 1.0);
  const Vec x = random_vec(6, rng), up = random_vec(4, rng);
  auto grad = LinearLayer::zeros(4, 6);
  const Vec gx = l.backward(x, up, grad);
  const auto loss = [&](const LinearLayer& layer, std::span<const double> in) {
    const Vec y = layer.forward(in);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += y[i] * up[i];
    return s;
  };
  EXPECT_LT(finite_diff_check([&](std::span<const double> in) { return loss(l, in); }, x, gx, 1e-5).max_relative_error,
            1e-8);
  const auto fw = [&](std::span<const double> w) {
    LinearLayer probe = l;
    probe.weight.assign(w.begin(), w.end());
    return loss(probe, x);
  };
  EXPECT_LT(finite_diff_check(fw, l.weight, grad.weight, 1e-5).max_relative_error, 1e-6);
  EXPECT_EQ(grad.bias, up);
  EXPECT_EQ(l.backward_input(up), gx);
}

TEST(Softmax, EqualLogitsAreUniform) {
  const Vec p = softmax(Vec(8, 0.3));
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.125);
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    Vec z = random_vec(1 + t % 12, rng, 20.0);
    const Vec p = softmax(z);
    double s = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (auto& v : z) v += 123.25;
    EXPECT_LT(testutil::max_abs_diff(p, softmax(z)), 1e-12);
  }
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const Vec z = random_vec(6, rng, 2.0), up = random_vec(6, rng);
  const Vec g = softmax_backward(softmax(z), up);
  const auto f = [&](std::span<const double> x) {
    const Vec p = softmax(x);
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += p[i] * up[i];
    return s;
  };
  EXPECT_LT(finite_diff_check(f, z, g, 1e-5).max_relative_error, 1e-7);
}

TEST(FiniteDiff, Square) {
  const double x[1] = {3.0}, g[1] = {6.0};
  EXPECT_LT(finite_diff_check([](std::span<const double> p) { return p[0] * p[0]; }, x, g, 1e-5).max_relative_error,
            1e-8);
}

TEST(FiniteDiff, ConstantHasZeroError) {
  const double x[3] = {1, 2, 3}, g[3] = {0, 0, 0};
  const auto rep = finite_diff_check([](std::span<const double>) { return 4.0; }, x, g, 1e-5);
  EXPECT_EQ(rep.max_relative_error, 0.0);
}

TEST(FiniteDiff, ReportsWorstCoordinate) {
  const double x[3] = {1, 2, 3}, g[3] = {2, 5, 6};
  const auto rep = finite_diff_check(
      [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; }, x, g, 1e-5);
  EXPECT_EQ(rep.worst_index, 1u);
  EXPECT_NEAR(rep.max_relative_error, 0.2, 1e-8);
  EXPECT_NEAR(rep.numeric, 4.0, 1e-8);
}

TEST(FiniteDiff, NonFiniteValueThrows) {
  const double x[1] = {0.0}, g[1] = {0.0};
  EXPECT_THROW(finite_diff_check([](std::span<const double>) { return NAN; }, x, g, 1e-5), EvaluationError);
}

TEST(FeatureMapTest, RejectsBadData) {
  EXPECT_THROW(FeatureMap(2, 2, 1, {1, 2, 3}), InvalidInput);
  EXPECT_THROW(FeatureMap(1, 1, 1, {NAN}), InvalidInput);
}

TEST(FeatureMapTest, FmapRoundTripIsBitExact) {
  std::mt19937_64 rng(10);
  const FeatureMap m = random_map(3, 5, 2, rng);
  std::stringstream ss;
  write_fmap(ss, m);
  EXPECT_EQ(ss.str().size(), 16u + 3 * 5 * 2 * 8);
  EXPECT_EQ(ss.str().substr(0, 4), "FMAP");
  EXPECT_EQ(read_fmap(ss), m);
}

TEST(FeatureMapTest, FmapRejectsBadMagic) {
  std::stringstream ss("XMAP0000000000000000");
  EXPECT_THROW(read_fmap(ss), FormatError);
}
