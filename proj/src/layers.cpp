#include "rmfn/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "rmfn/error.hpp"

namespace rmfn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

// Unfold a zero-padded 3x3 neighbourhood into a (C*9) x (H*W) matrix.
AlignedBuffer im2col3(const Tensor& input) {
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  AlignedBuffer col(c_in * 9 * h * w, 0.0);
  const double* src = input.raw();
  for (std::size_t c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col.data() + ((c * 9 + ky * 3 + kx) * h * w);
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* src_row = src + (c * h + sy) * w;
          double* dst = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst[x] = src_row[sx];
          }
        }
      }
    }
  }
  return col;
}

void col2im3(const AlignedBuffer& col, Tensor& grad_input) {
  const std::size_t c_in = grad_input.dim(0), h = grad_input.dim(1), w = grad_input.dim(2);
  double* dst = grad_input.raw();
  for (std::size_t c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col.data() + ((c * 9 + ky * 3 + kx) * h * w);
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* dst_row = dst + (c * h + sy) * w;
          const double* src = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst_row[sx] += src[x];
          }
        }
      }
    }
  }
}

void check_conv_args(const Tensor& input, const Tensor& weights) {
  if (input.rank() != 3) throw_shape("conv3: input must be CxHxW, got " + shape_str(input.shape()));
  if (weights.rank() != 4 || weights.dim(2) != 3 || weights.dim(3) != 3)
    throw_shape("conv3: weights must be Cout x Cin x 3 x 3, got " + shape_str(weights.shape()));
  if (weights.dim(1) != input.dim(0))
    throw_shape("conv3: weights expect " + std::to_string(weights.dim(1)) + " input channels, input has " +
                std::to_string(input.dim(0)));
}

}  // namespace

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kConv3: return {out_channels, in_channels, 3, 3};
    case LayerKind::kLinear: return {out_channels, in_channels};
    default: return {};
  }
}

Shape LayerSpec::bias_shape() const { return has_params() ? Shape{out_channels} : Shape{}; }

std::string to_string(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv3: return "conv3:" + std::to_string(spec.in_channels) + ":" + std::to_string(spec.out_channels);
    case LayerKind::kMaxPool2: return "maxpool2";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLinear:
      return "linear:" + std::to_string(spec.in_channels) + ":" + std::to_string(spec.out_channels);
    case LayerKind::kDropout: {
      std::ostringstream os;
      os.precision(17);
      os << "dropout:" << spec.drop_rate;
      return os.str();
    }
  }
  return "?";
}

LayerSpec parse_layer_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw_format("empty layer spec");
  auto count = [&](std::size_t i) -> std::size_t {
    try {
      const long v = std::stol(parts.at(i));
      if (v <= 0) throw_format("layer spec '" + text + "': counts must be positive");
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw_format("layer spec '" + text + "': bad count");
    }
  };
  const std::string& kind = parts[0];
  if (kind == "conv3" && parts.size() == 3) return LayerSpec::conv3(count(1), count(2));
  if (kind == "linear" && parts.size() == 3) return LayerSpec::linear(count(1), count(2));
  if (kind == "maxpool2" && parts.size() == 1) return LayerSpec::maxpool2();
  if (kind == "relu" && parts.size() == 1) return LayerSpec::relu();
  if (kind == "dropout" && parts.size() == 2) {
    double rate = 0.0;
    try {
      rate = std::stod(parts[1]);
    } catch (const std::logic_error&) {
      throw_format("layer spec '" + text + "': bad rate");
    }
    if (!(rate >= 0.0 && rate < 1.0)) throw_format("layer spec '" + text + "': rate must be in [0,1)");
    return LayerSpec::dropout(rate);
  }
  throw_format("unknown layer spec '" + text + "'");
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::kConv3:
      if (input.size() != 3) throw_shape("conv3 needs a CxHxW input, got " + shape_str(input));
      if (input[0] != spec.in_channels)
        throw_shape(to_string(spec) + " receives " + std::to_string(input[0]) + " channels");
      return {spec.out_channels, input[1], input[2]};
    case LayerKind::kMaxPool2:
      if (input.size() != 3) throw_shape("maxpool2 needs a CxHxW input, got " + shape_str(input));
      if (input[1] % 2 || input[2] % 2) throw_shape("maxpool2 needs even spatial sides, got " + shape_str(input));
      return {input[0], input[1] / 2, input[2] / 2};
    case LayerKind::kLinear:
      if (shape_numel(input) != spec.in_channels)
        throw_shape(to_string(spec) + " receives " + std::to_string(shape_numel(input)) + " features");
      return {spec.out_channels};
    case LayerKind::kRelu:
    case LayerKind::kDropout:
      return input;
  }
  return input;
}

Tensor conv3_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_conv_args(input, weights);
  const std::size_t c_out = weights.dim(0), c_in = input.dim(0), hw = input.dim(1) * input.dim(2);
  expect_shape(bias, {c_out}, "conv3 bias");

  const AlignedBuffer col = im2col3(input);
  Tensor out({c_out, input.dim(1), input.dim(2)});
  MatrixMap y(out.raw(), c_out, hw);
  y.noalias() = ConstMatrixMap(weights.raw(), c_out, c_in * 9) * ConstMatrixMap(col.data(), c_in * 9, hw);
  y.colwise() += ConstVectorMap(bias.raw(), c_out);
  return out;
}

Conv3Grads conv3_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  check_conv_args(input, weights);
  const std::size_t c_out = weights.dim(0), c_in = input.dim(0), hw = input.dim(1) * input.dim(2);
  expect_shape(upstream, {c_out, input.dim(1), input.dim(2)}, "conv3 upstream gradient");

  const AlignedBuffer col = im2col3(input);
  ConstMatrixMap dy(upstream.raw(), c_out, hw);
  ConstMatrixMap w(weights.raw(), c_out, c_in * 9);

  Conv3Grads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({c_out})};
  MatrixMap(g.grad_weights.raw(), c_out, c_in * 9).noalias() =
      dy * ConstMatrixMap(col.data(), c_in * 9, hw).transpose();
  VectorMap(g.grad_bias.raw(), c_out) = dy.rowwise().sum();

  AlignedBuffer dcol(c_in * 9 * hw);
  MatrixMap(dcol.data(), c_in * 9, hw).noalias() = w.transpose() * dy;
  col2im3(dcol, g.grad_input);
  return g;
}

MaxPoolResult maxpool2_forward(const Tensor& input) {
  const Shape out_shape = layer_output_shape(LayerSpec::maxpool2(), input.shape());
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  MaxPoolResult r{Tensor(out_shape), std::vector<std::size_t>(shape_numel(out_shape))};
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < h / 2; ++oy) {
      for (std::size_t ox = 0; ox < w / 2; ++ox, ++o) {
        std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax, const Shape& input_shape) {
  if (upstream.size() != argmax.size())
    throw_shape("maxpool2 backward: upstream has " + std::to_string(upstream.size()) + " cells, mask has " +
                std::to_string(argmax.size()));
  expect_shape(upstream, layer_output_shape(LayerSpec::maxpool2(), input_shape), "maxpool2 upstream gradient");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += upstream[i];
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& upstream) {
  expect_shape(upstream, input.shape(), "relu upstream gradient");
  Tensor grad = upstream;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(input[i] > 0.0)) grad[i] = 0.0;
  return grad;
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || weights.dim(1) != input.size())
    throw_shape("linear: weights " + shape_str(weights.shape()) + " do not accept " +
                std::to_string(input.size()) + " features");
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  expect_shape(bias, {n_out}, "linear bias");
  Tensor out({n_out});
  VectorMap(out.raw(), n_out).noalias() =
      ConstMatrixMap(weights.raw(), n_out, n_in) * ConstVectorMap(input.raw(), n_in) + ConstVectorMap(bias.raw(), n_out);
  return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  if (weights.rank() != 2 || weights.dim(1) != input.size())
    throw_shape("linear backward: weights " + shape_str(weights.shape()) + " do not accept " +
                std::to_string(input.size()) + " features");
  const std::size_t n_out = weights.dim(0), n_in = weights.dim(1);
  expect_shape(upstream, {n_out}, "linear upstream gradient");
  LinearGrads g{Tensor(input.shape()), Tensor(weights.shape()), upstream};
  ConstVectorMap dy(upstream.raw(), n_out);
  MatrixMap(g.grad_weights.raw(), n_out, n_in).noalias() = dy * ConstVectorMap(input.raw(), n_in).transpose();
  VectorMap(g.grad_input.raw(), n_in).noalias() = ConstMatrixMap(weights.raw(), n_out, n_in).transpose() * dy;
  return g;
}

DropoutResult dropout(const Tensor& input, double rate, Rng& rng, Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw_invalid("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (mode == Mode::kInfer || rate == 0.0) return {input, Tensor(input.shape(), 1.0)};
  const double keep_scale = 1.0 / (1.0 - rate);
  DropoutResult r{input, Tensor(input.shape())};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double s = rng.uniform() < rate ? 0.0 : keep_scale;
    r.scale[i] = s;
    r.output[i] = input[i] * s;
  }
  return r;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, int label) {
  if (label != 0 && label != 1) throw_invalid("label must be 0 or 1, got " + std::to_string(label));
  expect_shape(logits, {2}, "softmax_cross_entropy logits");
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  const double log_z = m + std::log(e0 + e1);
  CrossEntropy ce{log_z - logits[label], Tensor({2})};
  ce.grad_logits[0] = e0 / (e0 + e1);
  ce.grad_logits[1] = e1 / (e0 + e1);
  ce.grad_logits[label] -= 1.0;
  if (ce.loss < 0.0) ce.loss = 0.0;  // rounding when one logit dominates
  return ce;
}

}  // namespace rmfn
