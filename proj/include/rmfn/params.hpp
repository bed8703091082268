#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "rmfn/tensor.hpp"

namespace rmfn {

/// One trainable tensor with its gradient accumulator and momentum buffer.
struct ParamSlot {
  Tensor value;
  Tensor grad;
  Tensor momentum;

  explicit ParamSlot(Tensor v) : value(std::move(v)), grad(value.shape()), momentum(value.shape()) {}
};

struct LayerParams {
  ParamSlot weight;
  ParamSlot bias;
};

/// Parameters keyed by layer identifier ("m1.0", "s2.3", "fc.6", ...).
/// Iteration order is the lexicographic key order, which fixes the order of
/// optimizer updates and checkpoint records.
class ParamStore {
 public:
  LayerParams& add(const std::string& layer, Tensor weight, Tensor bias);
  bool contains(const std::string& layer) const { return layers_.count(layer) != 0; }
  LayerParams& at(const std::string& layer);
  const LayerParams& at(const std::string& layer) const;

  std::size_t size() const { return layers_.size(); }
  std::size_t parameter_count() const;

  void zero_grads();
  void scale_grads(double factor);

  /// Visits every slot as ("<layer>.weight" / "<layer>.bias", slot).
  void for_each(const std::function<void(const std::string&, ParamSlot&)>& fn);
  void for_each(const std::function<void(const std::string&, const ParamSlot&)>& fn) const;

  /// Slot lookup by its "<layer>.weight" / "<layer>.bias" name.
  ParamSlot& slot(const std::string& name);

  auto begin() const { return layers_.begin(); }
  auto end() const { return layers_.end(); }

 private:
  std::map<std::string, LayerParams> layers_;
};

}  // namespace rmfn
