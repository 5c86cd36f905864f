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

#include "deformfuse/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "deformfuse/augmentation.hpp"
#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"
#include "deformfuse/geometry.hpp"
#include "deformfuse/gradcheck.hpp"
#include "deformfuse/scenegen.hpp"
#include "deformfuse/seed.hpp"
#include "deformfuse/voxelizer.hpp"

namespace deformfuse {

bool SelftestReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SelftestCheck& c) { return c.passed; });
}

std::string SelftestReport::table() const {
  std::ostringstream os;
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  for (const auto& c : checks) {
    os << (c.passed ? "PASS  " : "FAIL  ") << c.name << std::string(width - c.name.size() + 2, ' ') << c.detail << '\n';
  }
  os << (all_passed() ? "all checks passed" : "SELFTEST FAILED") << '\n';
  return os.str();
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

FeatureMap random_map(int h, int w, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> data(static_cast<std::size_t>(h) * w * d);
  for (auto& v : data) v = u(rng);
  return FeatureMap(h, w, d, std::move(data));
}

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Scalar four-corner interpolation with zero padding, written out longhand.
double ref_sample(const MapView& m, double x, double y, int c) {
  const double x0 = std::floor(x), y0 = std::floor(y);
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const double cx = x0 + dx, cy = y0 + dy;
      if (cx < 0 || cy < 0 || cx > m.width - 1 || cy > m.height - 1) continue;
      const double w = (dx ? x - x0 : 1.0 - (x - x0)) * (dy ? y - y0 : 1.0 - (y - y0));
      acc += w * m.data[(static_cast<std::size_t>(cy) * m.width + static_cast<std::size_t>(cx)) * m.channels + c];
    }
  }
  return acc;
}

double ref_affine(const LinearLayer& l, std::span<const double> x, int o) {
  double acc = l.bias[o];
  for (int i = 0; i < l.in; ++i) acc += l.weight[static_cast<std::size_t>(o) * l.in + i] * x[i];
  return acc;
}

// Fully scalar DeformCAFA: every sample is projected by W'_m individually.
Vec ref_deform(std::span<const MapView> levels, std::span<const PixelCoord> refs, std::span<const double> voxel,
               const DeformCafaParams& p) {
  const auto& cfg = p.config;
  const int d = cfg.image_channels, c = cfg.voxel_channels, M = cfg.heads, K = cfg.points;
  Vec img(d), adapted(d), q(d), token(cfg.token_channels);
  for (int i = 0; i < d; ++i) img[i] = ref_sample(levels[0], refs[0].x, refs[0].y, i);
  for (int i = 0; i < d; ++i) adapted[i] = p.voxel_adapter ? ref_affine(*p.voxel_adapter, voxel, i) : voxel[i];
  for (int i = 0; i < d; ++i) q[i] = img[i] * adapted[i];
  for (int t = 0; t < cfg.token_channels; ++t) token[t] = ref_affine(p.token_fc, q, t);
  Vec out(c, 0.0);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (int m = 0; m < M; ++m) {
      double mx = -1e300;
      Vec logits(K);
      for (int k = 0; k < K; ++k) mx = std::max(mx, logits[k] = ref_affine(p.attn_net, token, m * K + k));
      double z = 0.0;
      for (int k = 0; k < K; ++k) z += std::exp(logits[k] - mx);
      Vec head(cfg.head_channels, 0.0);
      for (int k = 0; k < K; ++k) {
        const double a = std::exp(logits[k] - mx) / z;
        const double x = refs[l].x + ref_affine(p.offset_net, token, 2 * (m * K + k));
        const double y = refs[l].y + ref_affine(p.offset_net, token, 2 * (m * K + k) + 1);
        Vec s(d);
        for (int i = 0; i < d; ++i) s[i] = ref_sample(levels[l], x, y, i);
        for (int j = 0; j < cfg.head_channels; ++j) head[j] += a * ref_affine(p.value_proj[m], s, j);
      }
      for (int o = 0; o < c; ++o) out[o] += ref_affine(p.output_proj[m], head, o) / levels.size();
    }
  }
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SelftestCheck check(const std::string& name, bool ok, const std::string& detail) { return {name, ok, detail}; }

}  // namespace

SelftestReport run_selftest(const SelftestOptions& options) {
  if (!options.inject_fault.empty() && options.inject_fault != "offset-grad") {
    throw InvalidInput("unknown fault '" + options.inject_fault + "' (known: offset-grad)");
  }
  std::mt19937_64 rng(derive_seed(options.seed, SeedStream::kSelftest));
  SelftestReport report;

  {  // bilinear gradient
    const FeatureMap map = random_map(6, 7, 3, rng);
    double worst = 0.0;
    std::uniform_real_distribution<double> ux(0.2, 5.8), uy(0.2, 4.8);
    for (int trial = 0; trial < 5; ++trial) {
      const double x = ux(rng), y = uy(rng);
      const Vec up = random_vec(3, rng);
      const auto g = bilinear_sample_grad(map.view(), x, y, up);
      const auto f = [&](std::span<const double> p) {
        const Vec s = bilinear_sample(map.view(), p[0], p[1]);
        return s[0] * up[0] + s[1] * up[1] + s[2] * up[2];
      };
      const double pt[2] = {x, y}, an[2] = {g.grad_x, g.grad_y};
      worst = std::max(worst, finite_diff_check(f, pt, an, 1e-5).max_relative_error);
    }
    report.checks.push_back(check("bilinear.grad_vs_fd", worst < 1e-6, fmt("max rel err %.3e", worst)));
  }

  {  // softmax
    const Vec logits = random_vec(8, rng);
    const Vec p = softmax(logits);
    double sum = 0.0;
    for (double v : p) sum += v;
    Vec shifted = logits;
    for (auto& v : shifted) v += 3.7;
    const double shift_err = max_abs_diff(p, softmax(shifted));
    report.checks.push_back(check("softmax.normalization", std::abs(sum - 1.0) < 1e-12 && shift_err < 1e-12,
                                  fmt("|sum-1| %.1e", std::abs(sum - 1.0))));
  }

  {  // zero-offset degeneracy
    DeformCafaConfig cfg;
    cfg.heads = 1;
    cfg.points = 8;
    const FeatureMap map = random_map(9, 11, cfg.image_channels, rng);
    const auto params = DeformCafaParams::passthrough(cfg);
    std::uniform_real_distribution<double> ux(-3.0, 14.0), uy(-3.0, 12.0);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const PixelCoord r{ux(rng), uy(rng)};
      const MapView lv[1] = {map.view()};
      const Vec out = deform_cafa(lv, std::span<const PixelCoord>(&r, 1), random_vec(cfg.voxel_channels, rng), params);
      worst = std::max(worst, max_abs_diff(out, bilinear_sample(map.view(), r.x, r.y)));
    }
    report.checks.push_back(check("deform.zero_offset_degeneracy", worst < 1e-12, fmt("max abs diff %.1e", worst)));
  }

  {  // scalar oracle
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      DeformCafaConfig cfg;
      cfg.heads = trial % 2 ? 4 : 1;
      cfg.points = (trial % 3 == 0) ? 1 : (trial % 3 == 1 ? 4 : 8);
      cfg.image_channels = 8;
      cfg.voxel_channels = trial % 4 == 0 ? 5 : 8;
      const auto params = DeformCafaParams::random(cfg, rng, 0.5, 2.0);
      const FeatureMap l0 = random_map(12, 10, 8, rng);
      const auto pyr = generate_pyramid(l0, 2);
      const auto views = pyr.views();
      const PixelCoord r0{std::uniform_real_distribution<double>(0, 9)(rng), std::uniform_real_distribution<double>(0, 11)(rng)};
      const PixelCoord refs[2] = {r0, {r0.x * 0.5, r0.y * 0.5}};
      const Vec voxel = random_vec(cfg.voxel_channels, rng);
      worst = std::max(worst, max_abs_diff(deform_cafa(views, refs, voxel, params), ref_deform(views, refs, voxel, params)));
    }
    report.checks.push_back(check("deform.scalar_oracle", worst < 1e-10, fmt("max abs diff %.1e", worst)));
  }

  {  // dense vs scalar attention
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const DenseCafaConfig cfg{6, 5, 4, 3};
      const auto params = DenseCafaParams::random(cfg, rng);
      const FeatureMap map = random_map(8, 8, 6, rng);
      const Vec voxel = random_vec(5, rng);
      const Vec q = params.query.forward(voxel);
      Vec scores(64), values(64 * 3);
      double mx = -1e300;
      for (int i = 0; i < 64; ++i) {
        const Vec k = params.key.forward(map.view().pixel(i / 8, i % 8));
        const Vec v = params.value.forward(map.view().pixel(i / 8, i % 8));
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += q[j] * k[j];
        scores[i] = s / 2.0;
        mx = std::max(mx, scores[i]);
        std::copy(v.begin(), v.end(), values.begin() + i * 3);
      }
      double z = 0.0;
      for (double s : scores) z += std::exp(s - mx);
      Vec pooled(3, 0.0);
      for (int i = 0; i < 64; ++i) {
        for (int j = 0; j < 3; ++j) pooled[j] += std::exp(scores[i] - mx) / z * values[i * 3 + j];
      }
      const Vec expect = params.output.forward(pooled);
      worst = std::max({worst, max_abs_diff(dense_cafa(map.view(), voxel, params), expect),
                        max_abs_diff(dense_cafa_batch(map.view(), voxel, params), expect)});
    }
    report.checks.push_back(check("dense.scalar_oracle", worst < 1e-10, fmt("max abs diff %.1e", worst)));
  }

  {  // gradients by group
    std::map<std::string, double> worst;
    std::vector<std::string> order;
    const double scale = options.inject_fault == "offset-grad" ? 1.5 : 1.0;
    int done = 0;
    for (int attempt = 0; done < 3 && attempt < 200; ++attempt) {
      DeformCafaConfig cfg;
      cfg.heads = done == 0 ? 1 : 4;
      cfg.points = done == 2 ? 8 : 4;
      cfg.image_channels = 8;
      cfg.voxel_channels = done == 1 ? 6 : 8;
      const auto params = DeformCafaParams::random(cfg, rng, 0.5, 1.0);
      const auto pyr = generate_pyramid(random_map(12, 12, 8, rng), 2);
      const auto views = pyr.views();
      const PixelCoord r0{std::uniform_real_distribution<double>(2, 9)(rng), std::uniform_real_distribution<double>(2, 9)(rng)};
      const PixelCoord refs[2] = {r0, {r0.x * 0.5, r0.y * 0.5}};
      const Vec voxel = random_vec(cfg.voxel_channels, rng);
      if (!sampling_is_smooth(views, refs, voxel, params, 1e-3)) continue;
      const Vec up = random_vec(cfg.voxel_channels, rng);
      for (const auto& g : check_deform_gradients(views, refs, voxel, params, up, 1e-5, scale)) {
        const auto key = g.group.substr(0, g.group.find('['));
        if (!worst.count(key)) order.push_back(key);
        worst[key] = std::max(worst[key], g.report.max_relative_error);
      }
      ++done;
    }
    for (const auto& key : order) {
      report.checks.push_back(check("deform_grad." + key, worst[key] < 1e-4, fmt("max rel err %.3e", worst[key])));
    }
  }

  {  // projection round trip
    const auto rig = make_ring_rig(6, 160, 96, 80.0);
    double worst = 0.0;
    int seen = 0;
    std::uniform_real_distribution<double> u(-30.0, 30.0), uz(-2.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector3d v(u(rng), u(rng), uz(rng));
      const auto hit = select_camera(rig, v);
      if (!hit) continue;
      const auto& cam = rig.cameras[hit->camera_index];
      const auto again = project_point(cam, back_project(cam, hit->pixel, hit->depth));
      if (!again) {
        worst = 1.0;
        continue;
      }
      worst = std::max({worst, std::abs(again->pixel.x - hit->pixel.x), std::abs(again->pixel.y - hit->pixel.y)});
      ++seen;
    }
    report.checks.push_back(check("projection.round_trip", worst < 1e-9 && seen > 0, fmt("max pixel err %.1e", worst)));
  }

  {  // voxelizer permutation invariance
    SceneConfig sc;
    sc.box_count = 3;
    sc.points_per_box = 200;
    sc.ground_points = 500;
    const auto scene = generate_scene(rng(), sc);
    VoxelConfig vc;
    vc.voxel_size = Eigen::Vector3d(0.5, 0.5, 0.5);
    const auto a = voxelize(scene.cloud, vc);
    std::vector<std::size_t> perm(scene.cloud.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    PointCloud shuffled(scene.cloud.extra_channels());
    for (std::size_t i : perm) shuffled.push_back(scene.cloud.point(i));
    const bool same = a == voxelize(shuffled, vc);
    report.checks.push_back(check("voxelize.permutation_invariance", same, std::to_string(a.size()) + " voxels"));
  }

  {  // compositing decay: the original's coefficient after n patches is alpha^n
    double worst = 0.0;
    for (double alpha : {0.5, 0.6, 0.8}) {
      for (int n = 0; n <= 3; ++n) {
        FeatureMap image(4, 4, 1, std::vector<double>(16, 1.0));
        const FeatureMap patch(4, 4, 1);
        for (int i = 0; i < n; ++i) composite_patch(image, patch, PatchBounds{0, 0, 4, 4}, alpha);
        worst = std::max(worst, std::abs(image.pixel(1, 1)[0] - std::pow(alpha, n)));
      }
    }
    report.checks.push_back(check("augment.mixup_decay", worst < 1e-12, fmt("max err %.1e", worst)));
  }

  {  // dropout: no kept camera leaves voxel features untouched
    SceneConfig sc;
    sc.box_count = 3;
    sc.points_per_box = 150;
    sc.ground_points = 300;
    const auto scene = generate_scene(rng(), sc);
    VoxelConfig vc;
    vc.voxel_size = Eigen::Vector3d(0.5, 0.5, 0.5);
    const auto voxels = voxelize(scene.cloud, vc);
    DeformCafaConfig cfg;
    cfg.image_channels = 3;
    cfg.voxel_channels = voxels.feature_width;
    cfg.heads = 1;
    const auto params = DeformCafaParams::initial(cfg, rng);
    const std::vector<std::optional<FeaturePyramid>> none(scene.rig.size());
    const auto fused = fuse_scene(voxels, none, scene.rig, params, make_dropout_mask(6, 0, 1));
    bool same = true;
    for (std::size_t i = 0; i < voxels.size(); ++i) same = same && fused.fused[i] == voxels.voxels[i].feature;
    report.checks.push_back(check("fusion.all_dropped_identity", same, std::to_string(voxels.size()) + " voxels"));
  }
  return report;
}

}  // namespace deformfuse
