#pragma once

#include <string>
#include <vector>

#include "rmfn/layers.hpp"
#include "rmfn/params.hpp"

namespace rmfn {

/// Activations a stage keeps from a training-mode forward for its backward.
struct StageCache {
  std::vector<Tensor> inputs;                      // input of every layer
  std::vector<std::vector<std::size_t>> argmax;    // per layer; maxpool only
  std::vector<Tensor> dropout_scale;               // per layer; dropout only
};

/// A named stack of layers (FCN-M1, FCN-S2, FC head, ...). Parameters live in
/// a ParamStore under "<name>.<layer index>".
class Stage {
 public:
  Stage() = default;
  Stage(std::string name, std::vector<LayerSpec> layers);

  const std::string& name() const { return name_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::string layer_id(std::size_t index) const { return name_ + "." + std::to_string(index); }

  /// Shape algebra; throws a shape error naming stage and layer on mismatch.
  Shape output_shape(const Shape& input) const;

  /// Uniform Glorot initialization, zero biases. Each layer draws from its
  /// own stream keyed by (seed, layer id), so shared stage names get identical
  /// weights regardless of which other stages exist.
  void init_params(ParamStore& store, std::uint64_t seed) const;

  /// `rng` may be null in inference mode. `cache` is filled when non-null.
  Tensor forward(const ParamStore& store, const Tensor& input, Mode mode, Rng* rng, StageCache* cache) const;

  /// Accumulates parameter gradients into `store` and returns the gradient
  /// with respect to the stage input.
  Tensor backward(ParamStore& store, const StageCache& cache, const Tensor& upstream) const;

 private:
  std::string name_;
  std::vector<LayerSpec> layers_;
};

}  // namespace rmfn
