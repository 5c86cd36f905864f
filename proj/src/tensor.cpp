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

#include "deformfuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deformfuse/errors.hpp"

namespace deformfuse {

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite value");
  }
}

}  // namespace

FeatureMap::FeatureMap(int height, int width, int channels)
    : FeatureMap(height, width, channels,
                 std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                     std::max(width, 0) * std::max(channels, 0))) {}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || channels < 0) throw InvalidInput("FeatureMap: negative dimension");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidInput("FeatureMap: data length != h*w*d");
  }
  check_finite(data_, "FeatureMap");
}

LinearLayer LinearLayer::zeros(int out, int in) {
  if (out <= 0 || in <= 0) throw InvalidInput("LinearLayer: dimensions must be positive");
  LinearLayer layer;
  layer.in = in;
  layer.out = out;
  layer.weight.assign(static_cast<std::size_t>(out) * in, 0.0);
  layer.bias.assign(out, 0.0);
  return layer;
}

LinearLayer LinearLayer::identity(int n) {
  auto layer = zeros(n, n);
  for (int i = 0; i < n; ++i) layer.weight[static_cast<std::size_t>(i) * n + i] = 1.0;
  return layer;
}

LinearLayer LinearLayer::random(int out, int in, std::mt19937_64& rng, double scale) {
  auto layer = zeros(out, in);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& w : layer.weight) w = dist(rng);
  for (auto& b : layer.bias) b = dist(rng);
  return layer;
}

void LinearLayer::validate() const {
  if (in <= 0 || out <= 0) throw InvalidInput("LinearLayer: dimensions must be positive");
  if (weight.size() != static_cast<std::size_t>(out) * in || bias.size() != static_cast<std::size_t>(out)) {
    throw InvalidInput("LinearLayer: inconsistent dimensions");
  }
  check_finite(weight, "LinearLayer weight");
  check_finite(bias, "LinearLayer bias");
}

void LinearLayer::forward_into(std::span<const double> input, std::span<double> output) const {
  if (static_cast<int>(input.size()) != in || static_cast<int>(output.size()) != out) {
    throw InvalidInput("LinearLayer: dimension mismatch (expected " + std::to_string(in) + " -> " +
                       std::to_string(out) + ", got " + std::to_string(input.size()) + ")");
  }
  const double* w = weight.data();
  for (int o = 0; o < out; ++o, w += in) {
    double acc = bias[o];
    for (int i = 0; i < in; ++i) acc += w[i] * input[i];
    output[o] = acc;
  }
}

Vec LinearLayer::forward(std::span<const double> input) const {
  Vec output(out);
  forward_into(input, output);
  return output;
}

Vec LinearLayer::backward_input(std::span<const double> grad_out) const {
  if (static_cast<int>(grad_out.size()) != out) throw InvalidInput("LinearLayer: grad dimension mismatch");
  Vec grad_in(in, 0.0);
  const double* w = weight.data();
  for (int o = 0; o < out; ++o, w += in) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    for (int i = 0; i < in; ++i) grad_in[i] += w[i] * g;
  }
  return grad_in;
}

Vec LinearLayer::backward(std::span<const double> input, std::span<const double> grad_out,
                          LinearLayer& grad) const {
  if (static_cast<int>(input.size()) != in) throw InvalidInput("LinearLayer: input dimension mismatch");
  if (grad.in != in || grad.out != out) throw InvalidInput("LinearLayer: gradient shape mismatch");
  for (int o = 0; o < out; ++o) {
    const double g = grad_out[o];
    grad.bias[o] += g;
    double* gw = grad.weight.data() + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) gw[i] += g * input[i];
  }
  return backward_input(grad_out);
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

Vec softmax_backward(std::span<const double> probs, std::span<const double> grad_probs) {
  if (probs.size() != grad_probs.size()) throw InvalidInput("softmax_backward: dimension mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_probs[i];
  Vec out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_probs[i] - dot);
  return out;
}

namespace {

struct Footprint {
  int x0 = 0;
  int y0 = 0;
  double fx = 0.0;
  double fy = 0.0;
  bool any_inside = false;
};

Footprint locate(const MapView& map, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidInput("bilinear_sample: non-finite coordinate");
  if (map.empty()) throw InvalidInput("bilinear_sample: empty map");
  Footprint f;
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  // Whole 2x2 footprint in the padding region.
  if (xf < -1.0 || yf < -1.0 || xf > map.width - 1 || yf > map.height - 1) return f;
  f.x0 = static_cast<int>(xf);
  f.y0 = static_cast<int>(yf);
  f.fx = x - xf;
  f.fy = y - yf;
  f.any_inside = true;
  return f;
}

bool inside(const MapView& map, int x, int y) { return x >= 0 && y >= 0 && x < map.width && y < map.height; }

}  // namespace

void bilinear_accumulate(const MapView& map, double x, double y, double weight, std::span<double> out) {
  const Footprint f = locate(map, x, y);
  if (static_cast<int>(out.size()) != map.channels) throw InvalidInput("bilinear_accumulate: channel mismatch");
  if (!f.any_inside) return;
  const double w[4] = {(1.0 - f.fx) * (1.0 - f.fy), f.fx * (1.0 - f.fy), (1.0 - f.fx) * f.fy, f.fx * f.fy};
  const int cx[4] = {f.x0, f.x0 + 1, f.x0, f.x0 + 1};
  const int cy[4] = {f.y0, f.y0, f.y0 + 1, f.y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (!inside(map, cx[i], cy[i]) || w[i] == 0.0) continue;
    const double s = weight * w[i];
    const auto px = map.pixel(cy[i], cx[i]);
    for (int c = 0; c < map.channels; ++c) out[c] += s * px[c];
  }
}

Vec bilinear_sample(const MapView& map, double x, double y) {
  const Footprint f = locate(map, x, y);
  Vec out(map.channels, 0.0);
  if (!f.any_inside) return out;
  const double w[4] = {(1.0 - f.fx) * (1.0 - f.fy), f.fx * (1.0 - f.fy), (1.0 - f.fx) * f.fy, f.fx * f.fy};
  const int cx[4] = {f.x0, f.x0 + 1, f.x0, f.x0 + 1};
  const int cy[4] = {f.y0, f.y0, f.y0 + 1, f.y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (!inside(map, cx[i], cy[i]) || w[i] == 0.0) continue;
    const auto px = map.pixel(cy[i], cx[i]);
    for (int c = 0; c < map.channels; ++c) out[c] += w[i] * px[c];
  }
  return out;
}

BilinearGrad bilinear_sample_grad(const MapView& map, double x, double y, std::span<const double> upstream) {
  if (static_cast<int>(upstream.size()) != map.channels) throw InvalidInput("bilinear_sample_grad: channel mismatch");
  const Footprint f = locate(map, x, y);
  BilinearGrad g;
  if (!f.any_inside) return g;
  const double w[4] = {(1.0 - f.fx) * (1.0 - f.fy), f.fx * (1.0 - f.fy), (1.0 - f.fx) * f.fy, f.fx * f.fy};
  const int cx[4] = {f.x0, f.x0 + 1, f.x0, f.x0 + 1};
  const int cy[4] = {f.y0, f.y0, f.y0 + 1, f.y0 + 1};
  // Upstream-contracted corner values v[i] = <upstream, F(corner i)>.
  double v[4] = {0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    const bool in = inside(map, cx[i], cy[i]);
    g.corners[i] = BilinearCorner{cx[i], cy[i], in ? w[i] : 0.0, in};
    if (!in) continue;
    const auto px = map.pixel(cy[i], cx[i]);
    for (int c = 0; c < map.channels; ++c) v[i] += upstream[c] * px[c];
  }
  g.grad_x = (1.0 - f.fy) * (v[1] - v[0]) + f.fy * (v[3] - v[2]);
  g.grad_y = (1.0 - f.fx) * (v[2] - v[0]) + f.fx * (v[3] - v[1]);
  return g;
}

void BilinearGrad::scatter(const MapView& map, std::span<const double> upstream, std::span<double> grad_map,
                           double scale) const {
  if (grad_map.size() != map.data.size()) throw InvalidInput("BilinearGrad::scatter: gradient buffer size mismatch");
  for (const auto& corner : corners) {
    if (!corner.inside || corner.weight == 0.0) continue;
    const double s = scale * corner.weight;
    double* dst = grad_map.data() + (static_cast<std::size_t>(corner.y) * map.width + corner.x) * map.channels;
    for (int c = 0; c < map.channels; ++c) dst[c] += s * upstream[c];
  }
}

GradCheckReport finite_diff_check(const ScalarFunction& function, std::span<const double> point,
                                  std::span<const double> analytic_grad, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite_diff_check: step must be positive");
  if (point.size() != analytic_grad.size()) throw InvalidInput("finite_diff_check: gradient size mismatch");
  Vec x(point.begin(), point.end());
  GradCheckReport report;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = function(x);
    x[i] = saved - step;
    const double fm = function(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw EvaluationError("finite_diff_check: non-finite function value at index " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double analytic = analytic_grad[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    if (i == 0 || err > report.max_relative_error) report = GradCheckReport{err, i, analytic, numeric};
  }
  return report;
}

}  // namespace deformfuse
