#pragma once

#include "rmfn/model.hpp"
#include "rmfn/pgm.hpp"

namespace rmfn {

/// Channel mean of FM3, nearest-neighbour upsampled to the input side and
/// min-max normalized to [0, 1]. A constant map normalizes to 0.5.
Tensor fm3_heatmap(const RmfnModel& model, const Tensor& image);
Tensor heatmap_from_features(const Tensor& fm3, std::size_t side);

/// (1 - weight) * image + weight * heatmap, both 1 x S x S.
Tensor overlay(const Tensor& image, const Tensor& heatmap, double weight = 0.5);

struct MaskContrast {
  double inside;   // mean heatmap value over mask pixels
  double outside;  // mean over the rest
};
/// Mask pixels are the non-zero ones; throws if the mask is empty or full.
MaskContrast mask_contrast(const Tensor& heatmap, const GrayImage& mask);

}  // namespace rmfn
