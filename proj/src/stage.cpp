#include "rmfn/stage.hpp"

#include <cmath>

#include "rmfn/error.hpp"

namespace rmfn {

Stage::Stage(std::string name, std::vector<LayerSpec> layers) : name_(std::move(name)), layers_(std::move(layers)) {}

Shape Stage::output_shape(const Shape& input) const {
  Shape s = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      s = layer_output_shape(layers_[i], s);
    } catch (const Error& e) {
      throw_shape("stage " + name_ + " layer " + std::to_string(i) + " (" + to_string(layers_[i]) + "): " + e.what());
    }
  }
  return s;
}

void Stage::init_params(ParamStore& store, std::uint64_t seed) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    if (!spec.has_params()) continue;
    const std::string id = layer_id(i);
    const double receptive = spec.kind == LayerKind::kConv3 ? 9.0 : 1.0;
    const double fan_in = static_cast<double>(spec.in_channels) * receptive;
    const double fan_out = static_cast<double>(spec.out_channels) * receptive;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng = Rng::stream(seed, id);
    Tensor w(spec.weight_shape());
    for (auto& v : w.data()) v = rng.uniform(-limit, limit);
    store.add(id, std::move(w), Tensor(spec.bias_shape()));
  }
}

Tensor Stage::forward(const ParamStore& store, const Tensor& input, Mode mode, Rng* rng, StageCache* cache) const {
  if (cache) {
    cache->inputs.assign(layers_.size(), Tensor());
    cache->argmax.assign(layers_.size(), {});
    cache->dropout_scale.assign(layers_.size(), Tensor());
  }
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    Tensor y;
    switch (spec.kind) {
      case LayerKind::kConv3: {
        const LayerParams& p = store.at(layer_id(i));
        y = conv3_forward(x, p.weight.value, p.bias.value);
        break;
      }
      case LayerKind::kLinear: {
        const LayerParams& p = store.at(layer_id(i));
        y = linear(x, p.weight.value, p.bias.value);
        break;
      }
      case LayerKind::kMaxPool2: {
        MaxPoolResult r = maxpool2_forward(x);
        if (cache) cache->argmax[i] = std::move(r.argmax);
        y = std::move(r.output);
        break;
      }
      case LayerKind::kRelu:
        y = relu(x);
        break;
      case LayerKind::kDropout: {
        if (mode == Mode::kTrain && spec.drop_rate > 0.0 && !rng)
          throw_state("stage " + name_ + ": training-mode dropout needs an rng");
        Rng unused(0);
        DropoutResult r = dropout(x, spec.drop_rate, rng ? *rng : unused, mode);
        if (cache) cache->dropout_scale[i] = std::move(r.scale);
        y = std::move(r.output);
        break;
      }
    }
    if (cache) cache->inputs[i] = std::move(x);
    x = std::move(y);
  }
  return x;
}

Tensor Stage::backward(ParamStore& store, const StageCache& cache, const Tensor& upstream) const {
  if (cache.inputs.size() != layers_.size()) throw_state("stage " + name_ + ": missing activation cache");
  Tensor g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const LayerSpec& spec = layers_[i];
    const Tensor& x = cache.inputs[i];
    if (x.empty()) throw_state("stage " + name_ + ": stale activation cache at layer " + std::to_string(i));
    switch (spec.kind) {
      case LayerKind::kConv3: {
        LayerParams& p = store.at(layer_id(i));
        Conv3Grads cg = conv3_backward(x, p.weight.value, g);
        p.weight.grad += cg.grad_weights;
        p.bias.grad += cg.grad_bias;
        g = std::move(cg.grad_input);
        break;
      }
      case LayerKind::kLinear: {
        LayerParams& p = store.at(layer_id(i));
        LinearGrads lg = linear_backward(x, p.weight.value, g.reshaped({g.size()}));
        p.weight.grad += lg.grad_weights;
        p.bias.grad += lg.grad_bias;
        g = std::move(lg.grad_input);
        break;
      }
      case LayerKind::kMaxPool2:
        g = maxpool2_backward(g, cache.argmax[i], x.shape());
        break;
      case LayerKind::kRelu:
        g = relu_backward(x, g);
        break;
      case LayerKind::kDropout: {
        const Tensor& scale = cache.dropout_scale[i];
        expect_shape(g, scale.shape(), "dropout upstream gradient");
        for (std::size_t k = 0; k < g.size(); ++k) g[k] *= scale[k];
        break;
      }
    }
  }
  return g;
}

}  // namespace rmfn
