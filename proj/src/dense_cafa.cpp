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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "deformfuse/errors.hpp"
#include "deformfuse/fusion.hpp"

namespace deformfuse {

void DenseCafaConfig::validate() const {
  if (image_channels < 1 || voxel_channels < 1 || key_channels < 1 || value_channels < 1) {
    throw InvalidInput("DenseCafaConfig: channel counts must be >= 1");
  }
}

DenseCafaParams DenseCafaParams::random(const DenseCafaConfig& config, std::mt19937_64& rng, double scale) {
  config.validate();
  DenseCafaParams p;
  p.config = config;
  p.query = LinearLayer::random(config.key_channels, config.voxel_channels, rng, scale);
  p.key = LinearLayer::random(config.key_channels, config.image_channels, rng, scale);
  p.value = LinearLayer::random(config.value_channels, config.image_channels, rng, scale);
  p.output = LinearLayer::random(config.voxel_channels, config.value_channels, rng, scale);
  return p;
}

void DenseCafaParams::validate() const {
  config.validate();
  query.validate();
  key.validate();
  value.validate();
  output.validate();
  if (query.in != config.voxel_channels || query.out != config.key_channels || key.in != config.image_channels ||
      key.out != config.key_channels || value.in != config.image_channels || value.out != config.value_channels ||
      output.in != config.value_channels || output.out != config.voxel_channels) {
    throw InvalidInput("DenseCafaParams: layer shapes disagree with config");
  }
}

namespace {

void check_inputs(const MapView& map, std::size_t voxel_width, const DenseCafaParams& params) {
  if (map.empty()) throw InvalidInput("dense_cafa: empty feature map");
  if (map.channels != params.config.image_channels) throw InvalidInput("dense_cafa: map channel mismatch");
  if (voxel_width != static_cast<std::size_t>(params.config.voxel_channels)) {
    throw InvalidInput("dense_cafa: voxel channel mismatch");
  }
}

// The key bias adds the same q.b_k to every score and cancels in the softmax,
// so scores reduce to f_i . (W_k^T q) / sqrt(dk).
Vec folded_query(std::span<const double> voxel_feature, const DenseCafaParams& params) {
  const Vec q = params.query.forward(voxel_feature);
  Vec folded = params.key.backward_input(q);
  const double inv = 1.0 / std::sqrt(static_cast<double>(params.config.key_channels));
  for (auto& v : folded) v *= inv;
  return folded;
}

Vec scores(const MapView& map, std::span<const double> folded) {
  const std::size_t positions = static_cast<std::size_t>(map.height) * map.width;
  const int d = map.channels;
  Vec s(positions);
  const double* f = map.data.data();
  for (std::size_t i = 0; i < positions; ++i, f += d) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += folded[c] * f[c];
    s[i] = acc;
  }
  return s;
}

}  // namespace

Vec dense_cafa_attention(const MapView& map, std::span<const double> voxel_feature, const DenseCafaParams& params) {
  check_inputs(map, voxel_feature.size(), params);
  return softmax(scores(map, folded_query(voxel_feature, params)));
}

Vec dense_cafa(const MapView& map, std::span<const double> voxel_feature, const DenseCafaParams& params) {
  const Vec attn = dense_cafa_attention(map, voxel_feature, params);
  const int d = map.channels;
  Vec pooled(d, 0.0);
  const double* f = map.data.data();
  for (std::size_t i = 0; i < attn.size(); ++i, f += d) {
    for (int c = 0; c < d; ++c) pooled[c] += attn[i] * f[c];
  }
  // Attention sums to one, so value(sum a_i f_i) == sum a_i value(f_i).
  return params.output.forward(params.value.forward(pooled));
}

Vec dense_cafa_batch(const MapView& map, std::span<const double> voxel_features, const DenseCafaParams& params) {
  const int c = params.config.voxel_channels;
  const int d = params.config.image_channels;
  if (voxel_features.size() % c != 0) throw InvalidInput("dense_cafa_batch: voxel block must be N x c");
  const std::size_t n = voxel_features.size() / c;
  Vec out(n * c, 0.0);
  if (n == 0) return out;
  check_inputs(map, c, params);

  // Queries are processed kQueries at a time against blocks of kPositions
  // pixels with an online (running-max) softmax. Layouts keep the query index
  // innermost so the score and accumulate loops vectorize across queries.
  constexpr int kQueries = 8;
  constexpr std::size_t kPositions = 512;
  const std::size_t positions = static_cast<std::size_t>(map.height) * map.width;
  const double* fmap = map.data.data();

  Vec folded_t(static_cast<std::size_t>(d) * kQueries);  // [c][q]
  Eigen::ArrayXd block(kPositions * kQueries);           // [p][q]
  Vec acc(static_cast<std::size_t>(d) * kQueries);       // [c][q]
  double running_max[kQueries], total[kQueries], block_max[kQueries], rescale[kQueries];

  for (std::size_t q0 = 0; q0 < n; q0 += kQueries) {
    const int nq = static_cast<int>(std::min<std::size_t>(kQueries, n - q0));
    std::fill(folded_t.begin(), folded_t.end(), 0.0);
    for (int q = 0; q < nq; ++q) {
      const Vec f = folded_query(voxel_features.subspan((q0 + q) * c, c), params);
      for (int ch = 0; ch < d; ++ch) folded_t[static_cast<std::size_t>(ch) * kQueries + q] = f[ch];
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(std::begin(running_max), std::end(running_max), -std::numeric_limits<double>::infinity());
    std::fill(std::begin(total), std::end(total), 0.0);

    for (std::size_t p0 = 0; p0 < positions; p0 += kPositions) {
      const std::size_t np = std::min(kPositions, positions - p0);
      double* s = block.data();
      for (std::size_t p = 0; p < np; ++p) {
        const double* f = fmap + (p0 + p) * d;
        double* row = s + p * kQueries;
        for (int q = 0; q < kQueries; ++q) row[q] = 0.0;
        for (int ch = 0; ch < d; ++ch) {
          const double fv = f[ch];
          const double* ft = folded_t.data() + static_cast<std::size_t>(ch) * kQueries;
          for (int q = 0; q < kQueries; ++q) row[q] += fv * ft[q];
        }
      }
      std::fill(std::begin(block_max), std::end(block_max), -std::numeric_limits<double>::infinity());
      for (std::size_t p = 0; p < np; ++p) {
        for (int q = 0; q < kQueries; ++q) block_max[q] = std::max(block_max[q], s[p * kQueries + q]);
      }
      for (int q = 0; q < kQueries; ++q) {
        const double next = std::max(running_max[q], block_max[q]);
        rescale[q] = std::exp(running_max[q] - next);  // exp(-inf) == 0 on the first block
        running_max[q] = next;
        total[q] *= rescale[q];
      }
      for (int ch = 0; ch < d; ++ch) {
        for (int q = 0; q < kQueries; ++q) acc[static_cast<std::size_t>(ch) * kQueries + q] *= rescale[q];
      }
      for (std::size_t p = 0; p < np; ++p) {
        for (int q = 0; q < kQueries; ++q) s[p * kQueries + q] -= running_max[q];
      }
      auto used = block.head(static_cast<Eigen::Index>(np * kQueries));
      used = used.exp();
      for (std::size_t p = 0; p < np; ++p) {
        const double* f = fmap + (p0 + p) * d;
        const double* e = s + p * kQueries;
        for (int q = 0; q < kQueries; ++q) total[q] += e[q];
        for (int ch = 0; ch < d; ++ch) {
          const double fv = f[ch];
          double* a = acc.data() + static_cast<std::size_t>(ch) * kQueries;
          for (int q = 0; q < kQueries; ++q) a[q] += e[q] * fv;
        }
      }
    }

    Vec pooled(d);
    for (int q = 0; q < nq; ++q) {
      for (int ch = 0; ch < d; ++ch) pooled[ch] = acc[static_cast<std::size_t>(ch) * kQueries + q] / total[q];
      const Vec o = params.output.forward(params.value.forward(pooled));
      std::copy(o.begin(), o.end(), out.begin() + static_cast<std::ptrdiff_t>((q0 + q) * c));
    }
  }
  return out;
}

}  // namespace deformfuse
