#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rmfn/rng.hpp"
#include "rmfn/tensor.hpp"

namespace rmfn {

// Differentiable primitives. Feature maps are C x H x W; linear layers treat
// their input as a flat vector whatever its shape.

enum class LayerKind { kConv3, kMaxPool2, kRelu, kLinear, kDropout };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in_channels = 0;   // conv3 / linear (input features)
  std::size_t out_channels = 0;  // conv3 / linear (output features)
  double drop_rate = 0.0;        // dropout

  static LayerSpec conv3(std::size_t in, std::size_t out) { return {LayerKind::kConv3, in, out, 0.0}; }
  static LayerSpec maxpool2() { return {LayerKind::kMaxPool2, 0, 0, 0.0}; }
  static LayerSpec relu() { return {LayerKind::kRelu, 0, 0, 0.0}; }
  static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::kLinear, in, out, 0.0}; }
  static LayerSpec dropout(double rate) { return {LayerKind::kDropout, 0, 0, rate}; }

  bool has_params() const { return kind == LayerKind::kConv3 || kind == LayerKind::kLinear; }
  Shape weight_shape() const;
  Shape bias_shape() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string to_string(const LayerSpec& spec);
/// Inverse of to_string, e.g. "conv3:1:64", "maxpool2", "dropout:0.5".
LayerSpec parse_layer_spec(const std::string& text);

/// Output shape of one layer, or a shape error naming the problem.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input);

enum class Mode { kTrain, kInfer };

// conv3: 3x3 kernel, stride 1, zero padding 1.
Tensor conv3_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct Conv3Grads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};
Conv3Grads conv3_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index of each output cell's winner
};
// 2x2 window, stride 2. Ties go to the first winner in row-major order.
MaxPoolResult maxpool2_forward(const Tensor& input);
Tensor maxpool2_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax, const Shape& input_shape);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& upstream);

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);
struct LinearGrads {
  Tensor grad_input;  // shaped like the forward input
  Tensor grad_weights;
  Tensor grad_bias;
};
LinearGrads linear_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

struct DropoutResult {
  Tensor output;
  Tensor scale;  // per-element multiplier applied: 0 or 1/(1-rate)
};
/// Inverted dropout; identity in inference mode or at rate 0.
DropoutResult dropout(const Tensor& input, double rate, Rng& rng, Mode mode);

struct CrossEntropy {
  double loss;
  Tensor grad_logits;
};
/// Two-way softmax cross-entropy; label must be 0 or 1.
CrossEntropy softmax_cross_entropy(const Tensor& logits, int label);

}  // namespace rmfn
