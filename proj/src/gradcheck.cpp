#include "rmfn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rmfn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss, const std::vector<Probe>& probes,
                                  double step) {
  GradCheckReport report;
  for (const Probe& p : probes) {
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      double& v = (*p.value)[i];
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      ++report.checked;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.finite = false;
        report.max_rel_error = INFINITY;
        report.worst = p.name + "[" + std::to_string(i) + "]";
        continue;
      }
      const double err = relative_error((*p.analytic)[i], (up - down) / (2.0 * step));
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const Stage& stage, ParamStore& store, const Tensor& input, double step,
                                  std::uint64_t seed) {
  Tensor x = input;
  const Shape out_shape = stage.output_shape(x.shape());
  Tensor weights(out_shape);
  Rng rng(seed);
  for (auto& w : weights.data()) w = rng.uniform(-1.0, 1.0);

  auto loss = [&] {
    const Tensor y = stage.forward(store, x, Mode::kInfer, nullptr, nullptr);
    return y.all_finite() ? dot(y, weights) : NAN;
  };

  StageCache cache;
  stage.forward(store, x, Mode::kInfer, nullptr, &cache);
  store.zero_grads();
  const Tensor grad_input = stage.backward(store, cache, weights);

  std::vector<Probe> probes;
  for (std::size_t i = 0; i < stage.layers().size(); ++i) {
    if (!stage.layers()[i].has_params()) continue;
    LayerParams& p = store.at(stage.layer_id(i));
    probes.push_back({stage.layer_id(i) + ".weight", &p.weight.value, &p.weight.grad});
    probes.push_back({stage.layer_id(i) + ".bias", &p.bias.value, &p.bias.grad});
  }
  probes.push_back({"input", &x, &grad_input});
  GradCheckReport report = finite_diff_check(loss, probes, step);
  if (!grad_input.all_finite()) report.finite = false;
  return report;
}

}  // namespace rmfn
