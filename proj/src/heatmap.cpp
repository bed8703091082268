#include "rmfn/heatmap.hpp"

#include <algorithm>

#include "rmfn/error.hpp"

namespace rmfn {

Tensor heatmap_from_features(const Tensor& fm3, std::size_t side) {
  if (fm3.rank() != 3) throw_shape("heatmap: FM3 must be CxHxW, got " + shape_str(fm3.shape()));
  const std::size_t ch = fm3.dim(0), h = fm3.dim(1), w = fm3.dim(2);
  if (side % h || side % w)
    throw_shape("heatmap: input side " + std::to_string(side) + " is not a multiple of FM3 " + shape_str(fm3.shape()));

  std::vector<double> mean(h * w, 0.0);
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t i = 0; i < h * w; ++i) mean[i] += fm3[c * h * w + i];
  for (auto& v : mean) v /= static_cast<double>(ch);
  const auto [lo_it, hi_it] = std::minmax_element(mean.begin(), mean.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  for (auto& v : mean) v = range > 0.0 ? (v - lo) / range : 0.5;

  Tensor heat({1, side, side});
  const std::size_t sy = side / h, sx = side / w;
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) heat.at(0, y, x) = mean[(y / sy) * w + x / sx];
  return heat;
}

Tensor fm3_heatmap(const RmfnModel& model, const Tensor& image) {
  const ForwardResult r = model.forward(image, Mode::kInfer);
  return heatmap_from_features(r.fm3, static_cast<std::size_t>(model.config().input_side));
}

Tensor overlay(const Tensor& image, const Tensor& heatmap, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) throw_invalid("overlay weight must be in [0,1]");
  expect_shape(heatmap, image.shape(), "overlay heatmap");
  Tensor out(image.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - weight) * image[i] + weight * heatmap[i];
  return out;
}

MaskContrast mask_contrast(const Tensor& heatmap, const GrayImage& mask) {
  if (heatmap.size() != mask.pixels.size()) throw_shape("mask_contrast: mask and heatmap sizes differ");
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (std::size_t i = 0; i < heatmap.size(); ++i) {
    if (mask.pixels[i]) {
      in_sum += heatmap[i];
      ++in_n;
    } else {
      out_sum += heatmap[i];
      ++out_n;
    }
  }
  if (!in_n || !out_n) throw_invalid("mask_contrast: mask must be neither empty nor full");
  return {in_sum / static_cast<double>(in_n), out_sum / static_cast<double>(out_n)};
}

}  // namespace rmfn
