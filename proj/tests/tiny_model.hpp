#pragma once

// The smallest rmfn_c that exercises both fusions: 3x16x16 input, 2x2 grids
// at both scales, every stack two channels wide. Shared by the unit tests
// and the acceptance binary.

#include "oracles.hpp"
#include "rmfn/gradcheck.hpp"
#include "rmfn/model.hpp"

inline rmfn::RmfnConfig tiny_rmfn_config() {
  using rmfn::LayerSpec;
  rmfn::RmfnConfig c;
  c.variant = rmfn::Variant::kRmfnC;
  c.input_side = 16;
  c.input_channels = 3;
  c.channel_scale = 1.0;
  c.dropout_rate = 0.5;
  c.m1 = {LayerSpec::conv3(3, 2), LayerSpec::relu(), LayerSpec::maxpool2()};
  c.m2 = {LayerSpec::conv3(2, 2), LayerSpec::relu(), LayerSpec::maxpool2()};
  c.m3 = {LayerSpec::conv3(2, 2), LayerSpec::relu(), LayerSpec::maxpool2()};
  c.s1 = {LayerSpec::conv3(3, 2), LayerSpec::relu(), LayerSpec::maxpool2()};
  c.s2 = {LayerSpec::conv3(3, 2), LayerSpec::relu(), LayerSpec::maxpool2(),
          LayerSpec::conv3(2, 2), LayerSpec::relu(), LayerSpec::maxpool2()};
  c.fc = {LayerSpec::linear(8, 4), LayerSpec::relu(), LayerSpec::dropout(0.5), LayerSpec::linear(4, 2)};
  c.scale1 = rmfn::scale1_grid(2, 8, 16);
  // Two 12 px regions overlapping by 8: slices [0,3) and [1,4) on the 4x4 map.
  c.scale2 = rmfn::scale2_grid(2, 12, 8, 16);
  return c;
}

// Cross-entropy of an inference-mode forward against label 1, checked over
// every parameter entry, sub-networks included.
inline rmfn::GradCheckReport tiny_model_gradcheck(std::uint64_t seed) {
  using namespace rmfn;
  RmfnModel model = build_model(tiny_rmfn_config(), seed);
  model.params().for_each([&](const std::string& name, ParamSlot& s) {
    if (name.ends_with(".bias")) {
      Rng r = Rng::stream(seed, name);
      for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] = r.uniform(-0.3, 0.3);
    }
  });
  Rng rng(seed);
  Tensor image = oracle::random_tensor({3, 16, 16}, rng, 0.0, 1.0);

  ForwardTrace trace;
  const ForwardResult r = model.forward(image, Mode::kInfer, nullptr, &trace);
  model.params().zero_grads();
  model.backward(trace, softmax_cross_entropy(r.logits, 1).grad_logits);

  std::vector<Probe> probes;
  std::vector<Tensor> grads;
  model.params().for_each([&](const std::string&, ParamSlot& s) { grads.push_back(s.grad); });
  std::size_t k = 0;
  model.params().for_each([&](const std::string& name, ParamSlot& s) { probes.push_back({name, &s.value, &grads[k++]}); });
  auto loss = [&] { return softmax_cross_entropy(model.forward(image, Mode::kInfer).logits, 1).loss; };
  return finite_diff_check(loss, probes, 1e-5);
}
