#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "rmfn/params.hpp"
#include "rmfn/stage.hpp"

namespace rmfn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;       // "<param>[index]" or "input[index]"
  std::size_t checked = 0;
  bool finite = true;      // false if any loss evaluation was non-finite
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// gradients that are zero up to rounding from dominating the report.
double relative_error(double analytic, double numeric, double floor = 1e-5);

/// Compares backward() of an inference-mode stage against central
/// differences of the scalar loss sum(r * stage(input)) with fixed random r.
/// Every parameter entry and every input entry is perturbed.
GradCheckReport finite_diff_check(const Stage& stage, ParamStore& store, const Tensor& input, double step = 1e-5,
                                  std::uint64_t seed = 1);

/// Generic form: `loss` evaluates the scalar objective from the current
/// values; `analytic` is the gradient of each probed variable. Used for
/// whole-model checks.
struct Probe {
  std::string name;
  Tensor* value;
  const Tensor* analytic;
};
GradCheckReport finite_diff_check(const std::function<double()>& loss, const std::vector<Probe>& probes,
                                  double step = 1e-5);

}  // namespace rmfn
