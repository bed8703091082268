#include "rmfn/params.hpp"

#include "rmfn/error.hpp"

namespace rmfn {

LayerParams& ParamStore::add(const std::string& layer, Tensor weight, Tensor bias) {
  auto [it, inserted] = layers_.emplace(layer, LayerParams{ParamSlot(std::move(weight)), ParamSlot(std::move(bias))});
  if (!inserted) throw_invalid("duplicate parameter layer '" + layer + "'");
  return it->second;
}

LayerParams& ParamStore::at(const std::string& layer) {
  auto it = layers_.find(layer);
  if (it == layers_.end()) throw_state("no parameters for layer '" + layer + "'");
  return it->second;
}

const LayerParams& ParamStore::at(const std::string& layer) const {
  auto it = layers_.find(layer);
  if (it == layers_.end()) throw_state("no parameters for layer '" + layer + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : layers_) n += p.weight.value.size() + p.bias.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : layers_) {
    p.weight.grad.fill(0.0);
    p.bias.grad.fill(0.0);
  }
}

void ParamStore::scale_grads(double factor) {
  for (auto& [name, p] : layers_) {
    p.weight.grad *= factor;
    p.bias.grad *= factor;
  }
}

void ParamStore::for_each(const std::function<void(const std::string&, ParamSlot&)>& fn) {
  for (auto& [name, p] : layers_) {
    fn(name + ".weight", p.weight);
    fn(name + ".bias", p.bias);
  }
}

void ParamStore::for_each(const std::function<void(const std::string&, const ParamSlot&)>& fn) const {
  for (const auto& [name, p] : layers_) {
    fn(name + ".weight", p.weight);
    fn(name + ".bias", p.bias);
  }
}

ParamSlot& ParamStore::slot(const std::string& name) {
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) throw_state("bad parameter name '" + name + "'");
  LayerParams& p = at(name.substr(0, dot));
  const std::string which = name.substr(dot + 1);
  if (which == "weight") return p.weight;
  if (which == "bias") return p.bias;
  throw_state("bad parameter name '" + name + "'");
}

}  // namespace rmfn
