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

#pragma once

// Dense f64 building blocks: channels-last feature maps, affine layers,
// softmax, zero-padded bilinear sampling and a central-difference checker.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace deformfuse {

using Vec = std::vector<double>;

/// Non-owning view of an h x w x d row-major, channels-last map.
struct MapView {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::span<const double> data;

  bool empty() const { return height == 0 || width == 0 || channels == 0; }
  std::span<const double> pixel(int y, int x) const {
    return data.subspan((static_cast<std::size_t>(y) * width + x) * channels, channels);
  }
};

class FeatureMap {
 public:
  FeatureMap() = default;
  /// Zero-filled map.
  FeatureMap(int height, int width, int channels);
  /// Takes ownership of `data`; throws InvalidInput on size mismatch or non-finite values.
  FeatureMap(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> pixel(int y, int x) const { return view().pixel(y, x); }
  std::span<double> pixel(int y, int x) {
    return std::span<double>(data_).subspan(
        (static_cast<std::size_t>(y) * width_ + x) * channels_, channels_);
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  MapView view() const { return MapView{height_, width_, channels_, data_}; }

  bool operator==(const FeatureMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// y = W x + b with W stored row-major (out x in).
struct LinearLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static LinearLayer zeros(int out, int in);
  static LinearLayer identity(int n);
  /// Weights and bias drawn uniformly from [-scale, scale].
  static LinearLayer random(int out, int in, std::mt19937_64& rng, double scale);

  void validate() const;
  Vec forward(std::span<const double> input) const;
  void forward_into(std::span<const double> input, std::span<double> output) const;

  /// Accumulates dW += grad_out * input^T and db += grad_out into `grad`
  /// (same shape as *this) and returns dL/dinput.
  Vec backward(std::span<const double> input, std::span<const double> grad_out,
               LinearLayer& grad) const;
  /// dL/dinput only.
  Vec backward_input(std::span<const double> grad_out) const;

  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  bool operator==(const LinearLayer&) const = default;
};

Vec softmax(std::span<const double> logits);
/// Gradient w.r.t. logits given softmax output `probs` and dL/dprobs.
Vec softmax_backward(std::span<const double> probs, std::span<const double> grad_probs);

/// Zero-padded bilinear interpolation at pixel coordinates (x, y); corners
/// outside [0, w-1] x [0, h-1] contribute zero.
Vec bilinear_sample(const MapView& map, double x, double y);
/// out += weight * bilinear_sample(map, x, y) without allocating.
void bilinear_accumulate(const MapView& map, double x, double y, double weight,
                         std::span<double> out);

struct BilinearCorner {
  int x = 0;
  int y = 0;
  double weight = 0.0;  // interpolation weight; 0 for padded corners
  bool inside = false;
};

struct BilinearGrad {
  /// Sparse dL/dmap: corner pixel (y, x) receives weight * upstream.
  std::array<BilinearCorner, 4> corners;
  double grad_x = 0.0;
  double grad_y = 0.0;

  /// Adds this contribution into a dense gradient buffer shaped like `map`.
  void scatter(const MapView& map, std::span<const double> upstream,
               std::span<double> grad_map, double scale = 1.0) const;
};

BilinearGrad bilinear_sample_grad(const MapView& map, double x, double y,
                                  std::span<const double> upstream);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences at `point`, compared elementwise against
/// `analytic_grad` with denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_check(const ScalarFunction& function, std::span<const double> point,
                                  std::span<const double> analytic_grad, double step);

// FMAP: "FMAP", u32 h, u32 w, u32 d (little-endian), then h*w*d f64 values.
void write_fmap(std::ostream& os, const FeatureMap& map);
FeatureMap read_fmap(std::istream& is);
void save_fmap(const std::string& path, const FeatureMap& map);
FeatureMap load_fmap(const std::string& path);

}  // namespace deformfuse
