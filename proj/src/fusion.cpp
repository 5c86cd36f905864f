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
#include <cmath>

#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"

namespace deformfuse {

DeformCafaConfig DeformCafaConfig::resolved() const {
  DeformCafaConfig r = *this;
  if (r.token_channels == 0) r.token_channels = r.image_channels;
  if (r.head_channels == 0 && r.heads > 0) r.head_channels = std::max(1, r.image_channels / r.heads);
  return r;
}

void DeformCafaConfig::validate() const {
  const auto r = resolved();
  if (r.heads < 1 || r.points < 1) throw InvalidInput("DeformCafaConfig: heads and points must be >= 1");
  if (r.image_channels < 1 || r.voxel_channels < 1 || r.token_channels < 1 || r.head_channels < 1) {
    throw InvalidInput("DeformCafaConfig: channel counts must be >= 1");
  }
}

DeformCafaParams DeformCafaParams::random(const DeformCafaConfig& config, std::mt19937_64& rng, double scale,
                                          double offset_scale) {
  config.validate();
  const auto cfg = config.resolved();
  const int mk = cfg.heads * cfg.points;
  DeformCafaParams p;
  p.config = cfg;
  if (cfg.voxel_channels != cfg.image_channels) {
    p.voxel_adapter = LinearLayer::random(cfg.image_channels, cfg.voxel_channels, rng, scale);
  }
  p.token_fc = LinearLayer::random(cfg.token_channels, cfg.image_channels, rng, scale);
  p.offset_net = LinearLayer::random(2 * mk, cfg.token_channels, rng, offset_scale);
  p.attn_net = LinearLayer::random(mk, cfg.token_channels, rng, scale);
  for (int m = 0; m < cfg.heads; ++m) {
    p.value_proj.push_back(LinearLayer::random(cfg.head_channels, cfg.image_channels, rng, scale));
    p.output_proj.push_back(LinearLayer::random(cfg.voxel_channels, cfg.head_channels, rng, scale));
  }
  return p;
}

DeformCafaParams DeformCafaParams::initial(const DeformCafaConfig& config, std::mt19937_64& rng, double scale) {
  auto p = random(config, rng, scale, scale);
  p.offset_net = LinearLayer::zeros(p.offset_net.out, p.offset_net.in);
  p.attn_net = LinearLayer::zeros(p.attn_net.out, p.attn_net.in);
  return p;
}

DeformCafaParams DeformCafaParams::zeros_like(const DeformCafaParams& other) {
  DeformCafaParams p = other;
  p.for_each_layer([](const std::string&, LinearLayer& layer) {
    std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  });
  return p;
}

DeformCafaParams DeformCafaParams::passthrough(const DeformCafaConfig& config) {
  auto cfg = config;
  cfg.heads = 1;
  cfg.head_channels = cfg.image_channels;
  cfg = cfg.resolved();
  cfg.validate();
  const int d = cfg.image_channels;
  const int c = cfg.voxel_channels;
  DeformCafaParams p;
  p.config = cfg;
  if (c != d) p.voxel_adapter = LinearLayer::zeros(d, c);
  p.token_fc = LinearLayer::zeros(cfg.token_channels, d);
  p.offset_net = LinearLayer::zeros(2 * cfg.points, cfg.token_channels);
  p.attn_net = LinearLayer::zeros(cfg.points, cfg.token_channels);
  p.value_proj.push_back(LinearLayer::identity(d));
  auto out = LinearLayer::zeros(c, d);
  for (int i = 0; i < std::min(c, d); ++i) out.weight[static_cast<std::size_t>(i) * d + i] = 1.0;
  p.output_proj.push_back(std::move(out));
  return p;
}

void DeformCafaParams::validate() const {
  config.validate();
  if (!(config == config.resolved())) throw InvalidInput("DeformCafaParams: config must be resolved");
  const int d = config.image_channels, c = config.voxel_channels, t = config.token_channels;
  const int mk = config.heads * config.points, dh = config.head_channels;
  const auto expect = [](const LinearLayer& layer, int out, int in, const char* name) {
    layer.validate();
    if (layer.out != out || layer.in != in) {
      throw InvalidInput(std::string("DeformCafaParams: ") + name + " has shape " + std::to_string(layer.out) + "x" +
                         std::to_string(layer.in) + ", expected " + std::to_string(out) + "x" + std::to_string(in));
    }
  };
  if ((c != d) != voxel_adapter.has_value()) {
    throw InvalidInput("DeformCafaParams: voxel_adapter must exist exactly when c != d");
  }
  if (voxel_adapter) expect(*voxel_adapter, d, c, "voxel_adapter");
  expect(token_fc, t, d, "token_fc");
  expect(offset_net, 2 * mk, t, "offset_net");
  expect(attn_net, mk, t, "attn_net");
  if (static_cast<int>(value_proj.size()) != config.heads || static_cast<int>(output_proj.size()) != config.heads) {
    throw InvalidInput("DeformCafaParams: need one value/output projection per head");
  }
  for (int m = 0; m < config.heads; ++m) {
    expect(value_proj[m], dh, d, "value_proj");
    expect(output_proj[m], c, dh, "output_proj");
  }
}

std::size_t DeformCafaParams::parameter_count() const {
  std::size_t n = 0;
  for_each_layer([&](const std::string&, const LinearLayer& layer) { n += layer.parameter_count(); });
  return n;
}

namespace {

Vec adapt_voxel(std::span<const double> voxel_feature, const DeformCafaParams& params) {
  if (static_cast<int>(voxel_feature.size()) != params.config.voxel_channels) {
    throw InvalidInput("voxel feature has " + std::to_string(voxel_feature.size()) + " channels, expected " +
                       std::to_string(params.config.voxel_channels));
  }
  if (params.voxel_adapter) return params.voxel_adapter->forward(voxel_feature);
  return Vec(voxel_feature.begin(), voxel_feature.end());
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite value");
  }
}

// Offsets and per-head normalized attention for one token.
struct Sampling {
  Vec offsets;    // M*K*2
  Vec attention;  // M*K
};

Sampling make_sampling(const CrossDomainToken& token, const DeformCafaParams& params) {
  const int M = params.config.heads, K = params.config.points;
  Sampling s;
  s.offsets = params.offset_net.forward(token.value);
  const Vec logits = params.attn_net.forward(token.value);
  s.attention.resize(logits.size());
  for (int m = 0; m < M; ++m) {
    const auto head = softmax(std::span<const double>(logits).subspan(static_cast<std::size_t>(m) * K, K));
    std::copy(head.begin(), head.end(), s.attention.begin() + static_cast<std::ptrdiff_t>(m) * K);
  }
  return s;
}

// Scratch buffers reused across voxels in batch mode.
struct Workspace {
  Vec gathered;  // d
  Vec head;      // d_h
  Vec projected; // c
};

// out += scale * sum_m W_m(W'_m(sum_k A_mk F(R + dR_mk)))
void aggregate_level(const MapView& level, PixelCoord ref, const Sampling& s, const DeformCafaParams& params,
                     double scale, std::span<double> out, Workspace& ws) {
  const int M = params.config.heads, K = params.config.points;
  if (level.channels != params.config.image_channels) {
    throw InvalidInput("feature map has " + std::to_string(level.channels) + " channels, expected " +
                       std::to_string(params.config.image_channels));
  }
  ws.gathered.resize(level.channels);
  ws.head.resize(params.config.head_channels);
  ws.projected.resize(params.config.voxel_channels);
  for (int m = 0; m < M; ++m) {
    std::fill(ws.gathered.begin(), ws.gathered.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      const std::size_t mk = static_cast<std::size_t>(m) * K + k;
      bilinear_accumulate(level, ref.x + s.offsets[2 * mk], ref.y + s.offsets[2 * mk + 1], s.attention[mk],
                          ws.gathered);
    }
    // The attention weights of a head sum to one, so W'_m's bias passes through once.
    params.value_proj[m].forward_into(ws.gathered, ws.head);
    params.output_proj[m].forward_into(ws.head, ws.projected);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * ws.projected[i];
  }
}

void check_reference(PixelCoord r) {
  if (!std::isfinite(r.x) || !std::isfinite(r.y)) throw InvalidInput("reference point must be finite");
}

}  // namespace

CrossDomainToken make_token(std::span<const double> image_feature, std::span<const double> voxel_feature,
                            const DeformCafaParams& params) {
  check_finite(image_feature, "make_token image feature");
  check_finite(voxel_feature, "make_token voxel feature");
  Vec q = adapt_voxel(voxel_feature, params);
  if (image_feature.size() != q.size()) {
    throw InvalidInput("make_token: image feature has " + std::to_string(image_feature.size()) +
                       " channels, mapped voxel feature has " + std::to_string(q.size()));
  }
  for (std::size_t i = 0; i < q.size(); ++i) q[i] *= image_feature[i];
  return CrossDomainToken{params.token_fc.forward(q)};
}

Vec attention_weights(const CrossDomainToken& token, const DeformCafaParams& params) {
  return make_sampling(token, params).attention;
}

Vec sampling_offsets(const CrossDomainToken& token, const DeformCafaParams& params) {
  return params.offset_net.forward(token.value);
}

Vec deform_cafa_single(const MapView& level, PixelCoord reference, const CrossDomainToken& token,
                       const DeformCafaParams& params) {
  check_reference(reference);
  const Sampling s = make_sampling(token, params);
  Vec out(params.config.voxel_channels, 0.0);
  Workspace ws;
  aggregate_level(level, reference, s, params, 1.0, out, ws);
  return out;
}

Vec deform_cafa_multilevel(std::span<const MapView> levels, std::span<const PixelCoord> references,
                           const CrossDomainToken& token, const DeformCafaParams& params) {
  if (levels.empty() || levels.size() != references.size()) {
    throw InvalidInput("deform_cafa_multilevel: need one reference per level");
  }
  for (auto r : references) check_reference(r);
  const Sampling s = make_sampling(token, params);
  Vec out(params.config.voxel_channels, 0.0);
  Workspace ws;
  const double scale = 1.0 / static_cast<double>(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) aggregate_level(levels[l], references[l], s, params, scale, out, ws);
  return out;
}

Vec deform_cafa(std::span<const MapView> levels, std::span<const PixelCoord> references,
                std::span<const double> voxel_feature, const DeformCafaParams& params) {
  if (levels.empty() || levels.size() != references.size()) {
    throw InvalidInput("deform_cafa: need one reference per level");
  }
  check_reference(references[0]);
  const Vec image_feature = bilinear_sample(levels[0], references[0].x, references[0].y);
  const auto token = make_token(image_feature, voxel_feature, params);
  return deform_cafa_multilevel(levels, references, token, params);
}

DeformCafaGrads deform_cafa_backward(std::span<const MapView> levels, std::span<const PixelCoord> references,
                                     std::span<const double> voxel_feature, const DeformCafaParams& params,
                                     std::span<const double> upstream) {
  if (levels.empty() || levels.size() != references.size()) {
    throw InvalidInput("deform_cafa_backward: need one reference per level");
  }
  if (static_cast<int>(upstream.size()) != params.config.voxel_channels) {
    throw InvalidInput("deform_cafa_backward: upstream width != voxel channels");
  }
  for (auto r : references) check_reference(r);
  const int M = params.config.heads, K = params.config.points, d = params.config.image_channels;

  // Forward, keeping what the backward pass needs.
  const Vec image_feature = bilinear_sample(levels[0], references[0].x, references[0].y);
  const Vec adapted = adapt_voxel(voxel_feature, params);
  if (static_cast<int>(image_feature.size()) != d) throw InvalidInput("deform_cafa_backward: level-0 channel mismatch");
  Vec product(d);
  for (int i = 0; i < d; ++i) product[i] = image_feature[i] * adapted[i];
  const CrossDomainToken token{params.token_fc.forward(product)};
  const Sampling s = make_sampling(token, params);

  DeformCafaGrads g;
  g.params = DeformCafaParams::zeros_like(params);
  g.levels.reserve(levels.size());
  for (const auto& level : levels) g.levels.emplace_back(level.data.size(), 0.0);

  Vec d_offsets(s.offsets.size(), 0.0);
  Vec d_attention(s.attention.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(levels.size());
  Vec scaled_up(upstream.begin(), upstream.end());
  for (auto& u : scaled_up) u *= scale;

  Vec gathered(d), sample(d), d_sample(d);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const MapView& level = levels[l];
    if (level.channels != d) throw InvalidInput("deform_cafa_backward: level channel mismatch");
    const PixelCoord ref = references[l];
    for (int m = 0; m < M; ++m) {
      std::fill(gathered.begin(), gathered.end(), 0.0);
      for (int k = 0; k < K; ++k) {
        const std::size_t mk = static_cast<std::size_t>(m) * K + k;
        bilinear_accumulate(level, ref.x + s.offsets[2 * mk], ref.y + s.offsets[2 * mk + 1], s.attention[mk], gathered);
      }
      const Vec head = params.value_proj[m].forward(gathered);
      const Vec d_head = params.output_proj[m].backward(head, scaled_up, g.params.output_proj[m]);
      const Vec d_gathered = params.value_proj[m].backward(gathered, d_head, g.params.value_proj[m]);
      for (int k = 0; k < K; ++k) {
        const std::size_t mk = static_cast<std::size_t>(m) * K + k;
        const double x = ref.x + s.offsets[2 * mk];
        const double y = ref.y + s.offsets[2 * mk + 1];
        sample = bilinear_sample(level, x, y);
        double dot = 0.0;
        for (int c = 0; c < d; ++c) {
          dot += d_gathered[c] * sample[c];
          d_sample[c] = s.attention[mk] * d_gathered[c];
        }
        d_attention[mk] += dot;
        const BilinearGrad bg = bilinear_sample_grad(level, x, y, d_sample);
        bg.scatter(level, d_sample, g.levels[l]);
        d_offsets[2 * mk] += bg.grad_x;
        d_offsets[2 * mk + 1] += bg.grad_y;
      }
    }
  }

  Vec d_logits(s.attention.size());
  for (int m = 0; m < M; ++m) {
    const auto off = static_cast<std::size_t>(m) * K;
    const auto dl = softmax_backward(std::span<const double>(s.attention).subspan(off, K),
                                     std::span<const double>(d_attention).subspan(off, K));
    std::copy(dl.begin(), dl.end(), d_logits.begin() + static_cast<std::ptrdiff_t>(off));
  }
  Vec d_token = params.offset_net.backward(token.value, d_offsets, g.params.offset_net);
  const Vec d_token_attn = params.attn_net.backward(token.value, d_logits, g.params.attn_net);
  for (std::size_t i = 0; i < d_token.size(); ++i) d_token[i] += d_token_attn[i];

  const Vec d_product = params.token_fc.backward(product, d_token, g.params.token_fc);
  Vec d_image(d), d_adapted(d);
  for (int i = 0; i < d; ++i) {
    d_image[i] = d_product[i] * adapted[i];
    d_adapted[i] = d_product[i] * image_feature[i];
  }
  bilinear_sample_grad(levels[0], references[0].x, references[0].y, d_image).scatter(levels[0], d_image, g.levels[0]);
  if (params.voxel_adapter) {
    g.voxel_feature = params.voxel_adapter->backward(voxel_feature, d_adapted, *g.params.voxel_adapter);
  } else {
    g.voxel_feature = d_adapted;
  }
  return g;
}

Vec deform_cafa_batch(std::span<const MapView> levels, std::span<const double> scales,
                      std::span<const PixelCoord> level0_references, std::span<const double> voxel_features,
                      const DeformCafaParams& params) {
  const int c = params.config.voxel_channels, d = params.config.image_channels;
  const std::size_t n = level0_references.size();
  if (levels.empty() || levels.size() != scales.size()) throw InvalidInput("deform_cafa_batch: one scale per level");
  validate_pyramid_scales(scales);
  if (voxel_features.size() != n * c) throw InvalidInput("deform_cafa_batch: voxel feature block must be N x c");
  Vec out(n * c, 0.0);
  Workspace ws;
  Vec image_feature(d), product(d), adapted(d);
  CrossDomainToken token{Vec(params.config.token_channels)};
  const double level_scale = 1.0 / static_cast<double>(levels.size());
  for (std::size_t i = 0; i < n; ++i) {
    const PixelCoord r0 = level0_references[i];
    check_reference(r0);
    const auto voxel = voxel_features.subspan(i * c, c);
    std::fill(image_feature.begin(), image_feature.end(), 0.0);
    bilinear_accumulate(levels[0], r0.x, r0.y, 1.0, image_feature);
    if (params.voxel_adapter) {
      params.voxel_adapter->forward_into(voxel, adapted);
    } else {
      std::copy(voxel.begin(), voxel.end(), adapted.begin());
    }
    for (int k = 0; k < d; ++k) product[k] = image_feature[k] * adapted[k];
    params.token_fc.forward_into(product, token.value);
    const Sampling s = make_sampling(token, params);
    auto dst = std::span<double>(out).subspan(i * c, c);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      aggregate_level(levels[l], PixelCoord{r0.x * scales[l], r0.y * scales[l]}, s, params, level_scale, dst, ws);
    }
  }
  return out;
}

}  // namespace deformfuse
