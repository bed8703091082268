#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rmfn/tensor.hpp"

namespace rmfn {

/// Geometry of one region-pooling scale. Region (m, n) covers input rows
/// [(m-1)(L-eps), (m-1)(L-eps) + L) and likewise for columns; `divisor` is
/// the downscale from input pixels to the feature map the scale fuses into.
struct GridSpec {
  long grid = 1;         // regions per side
  long region_side = 0;  // L
  long overlap = 0;      // eps; 0 gives a plain partition
  long input_side = 0;   // L0
  long divisor = 1;

  long stride() const { return region_side - overlap; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Scale 1 of the VGG preset: 7x7 regions of 32 px, no overlap, fused at 1/2.
GridSpec scale1_grid(long grid, long region_side, long input_side);
/// Scale 2: overlapping regions fused at 1/4.
GridSpec scale2_grid(long grid, long region_side, long overlap, long input_side);

struct OverlapCheck {
  bool valid;
  long residual;  // (G-1)*eps - G*L + L0
};
OverlapCheck validate_overlap(long grid, long region_side, long overlap, long input_side);
inline OverlapCheck validate_overlap(const GridSpec& s) {
  return validate_overlap(s.grid, s.region_side, s.overlap, s.input_side);
}

/// Throws if the closure constraint fails or a quantity is not a multiple of
/// the divisor. The message names the offending quantity.
void check_grid(const GridSpec& spec);

/// Describes why check_grid would fail, or nothing if the spec is usable.
std::optional<std::string> grid_problem(const GridSpec& spec);

struct RegionIndex {
  long m;  // 1-based row
  long n;  // 1-based column
};

/// Row-major list of G*G crops, each C x L x L.
std::vector<Tensor> crop_regions(const Tensor& image, const GridSpec& spec);

/// Half-open feature-map window one region fuses into.
struct Slice {
  std::size_t row_begin, row_end, col_begin, col_end;
};

class FusionPlan {
 public:
  FusionPlan() = default;
  explicit FusionPlan(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t map_side() const { return map_side_; }
  std::size_t slice_side() const { return slice_side_; }
  std::size_t region_count() const { return slices_.size(); }
  const std::vector<Slice>& slices() const { return slices_; }
  const Slice& slice(RegionIndex r) const;

 private:
  GridSpec spec_;
  std::size_t map_side_ = 0;
  std::size_t slice_side_ = 0;
  std::vector<Slice> slices_;
};

FusionPlan build_fusion_plan(const GridSpec& spec);

/// main_map + scatter-add of each region's sub map into its slice, regions
/// in row-major order. Overlapping cells receive one addition per region.
Tensor fuse(const Tensor& main_map, const std::vector<Tensor>& sub_maps, const FusionPlan& plan);

struct FuseGrads {
  Tensor grad_main;
  std::vector<Tensor> grad_subs;
};
/// Adjoint of fuse: the main map receives the upstream gradient unchanged,
/// each sub map receives the upstream restricted to its slice.
FuseGrads fuse_backward(const Tensor& upstream, const FusionPlan& plan);

}  // namespace rmfn
