#include "rmfn/region.hpp"

#include "rmfn/error.hpp"

namespace rmfn {

GridSpec scale1_grid(long grid, long region_side, long input_side) {
  return GridSpec{grid, region_side, 0, input_side, 2};
}

GridSpec scale2_grid(long grid, long region_side, long overlap, long input_side) {
  return GridSpec{grid, region_side, overlap, input_side, 4};
}

OverlapCheck validate_overlap(long grid, long region_side, long overlap, long input_side) {
  const long residual = (grid - 1) * overlap - grid * region_side + input_side;
  return {residual == 0, residual};
}

std::optional<std::string> grid_problem(const GridSpec& s) {
  if (s.grid < 1 || s.region_side < 1 || s.input_side < 1 || s.overlap < 0 || s.divisor < 1)
    return "grid, region side, input side and divisor must be positive and overlap non-negative";
  if (s.overlap >= s.region_side) return "overlap " + std::to_string(s.overlap) + " must be below the region side";
  const OverlapCheck c = validate_overlap(s);
  if (!c.valid) return "overlap constraint (G-1)*eps - G*L + L0 = 0 fails with residual " + std::to_string(c.residual);
  const auto d = s.divisor;
  if (s.region_side % d) return "region side L=" + std::to_string(s.region_side) + " is not divisible by " + std::to_string(d);
  if (s.stride() % d)
    return "region stride L-eps=" + std::to_string(s.stride()) + " is not divisible by " + std::to_string(d);
  if (s.overlap % d) return "overlap eps=" + std::to_string(s.overlap) + " is not divisible by " + std::to_string(d);
  if (s.input_side % d)
    return "input side L0=" + std::to_string(s.input_side) + " is not divisible by " + std::to_string(d);
  return std::nullopt;
}

void check_grid(const GridSpec& spec) {
  if (auto problem = grid_problem(spec)) throw_invalid("grid " + std::to_string(spec.grid) + "x" +
                                                      std::to_string(spec.grid) + ": " + *problem);
}

std::vector<Tensor> crop_regions(const Tensor& image, const GridSpec& spec) {
  const OverlapCheck c = validate_overlap(spec);
  if (!c.valid) throw_invalid("crop_regions: overlap constraint fails with residual " + std::to_string(c.residual));
  if (spec.overlap < 0 || spec.overlap >= spec.region_side) throw_invalid("crop_regions: bad overlap");
  if (image.rank() != 3 || image.dim(1) != static_cast<std::size_t>(spec.input_side) ||
      image.dim(2) != static_cast<std::size_t>(spec.input_side))
    throw_shape("crop_regions: image " + shape_str(image.shape()) + " does not match input side " +
                std::to_string(spec.input_side));

  const std::size_t ch = image.dim(0), side = static_cast<std::size_t>(spec.region_side);
  const std::size_t stride = static_cast<std::size_t>(spec.stride());
  const std::size_t w = image.dim(2);
  std::vector<Tensor> regions;
  regions.reserve(static_cast<std::size_t>(spec.grid * spec.grid));
  for (long m = 0; m < spec.grid; ++m) {
    for (long n = 0; n < spec.grid; ++n) {
      const std::size_t y0 = static_cast<std::size_t>(m) * stride, x0 = static_cast<std::size_t>(n) * stride;
      Tensor r({ch, side, side});
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t y = 0; y < side; ++y) {
          const double* src = image.raw() + (c * image.dim(1) + y0 + y) * w + x0;
          std::copy(src, src + side, r.raw() + (c * side + y) * side);
        }
      regions.push_back(std::move(r));
    }
  }
  return regions;
}

FusionPlan::FusionPlan(const GridSpec& spec) : spec_(spec) {
  check_grid(spec);
  const auto d = static_cast<std::size_t>(spec.divisor);
  map_side_ = static_cast<std::size_t>(spec.input_side) / d;
  // (L - eps)/d + eps/d
  slice_side_ = static_cast<std::size_t>(spec.stride()) / d + static_cast<std::size_t>(spec.overlap) / d;
  const std::size_t step = static_cast<std::size_t>(spec.stride()) / d;
  for (long m = 0; m < spec.grid; ++m)
    for (long n = 0; n < spec.grid; ++n) {
      const std::size_t r0 = static_cast<std::size_t>(m) * step, c0 = static_cast<std::size_t>(n) * step;
      slices_.push_back({r0, r0 + slice_side_, c0, c0 + slice_side_});
    }
}

const Slice& FusionPlan::slice(RegionIndex r) const {
  if (r.m < 1 || r.n < 1 || r.m > spec_.grid || r.n > spec_.grid)
    throw_invalid("region (" + std::to_string(r.m) + "," + std::to_string(r.n) + ") outside the grid");
  return slices_[static_cast<std::size_t>((r.m - 1) * spec_.grid + (r.n - 1))];
}

FusionPlan build_fusion_plan(const GridSpec& spec) { return FusionPlan(spec); }

namespace {

std::string region_name(const FusionPlan& plan, std::size_t k) {
  const auto g = static_cast<std::size_t>(plan.spec().grid);
  return "(" + std::to_string(k / g + 1) + "," + std::to_string(k % g + 1) + ")";
}

void check_map(const Tensor& map, const FusionPlan& plan, const char* what) {
  if (map.rank() != 3 || map.dim(1) != plan.map_side() || map.dim(2) != plan.map_side())
    throw_shape(std::string(what) + " " + shape_str(map.shape()) + " does not match the plan's " +
                std::to_string(plan.map_side()) + "x" + std::to_string(plan.map_side()) + " map");
}

}  // namespace

Tensor fuse(const Tensor& main_map, const std::vector<Tensor>& sub_maps, const FusionPlan& plan) {
  check_map(main_map, plan, "fuse: main map");
  if (sub_maps.size() != plan.region_count())
    throw_shape("fuse: expected " + std::to_string(plan.region_count()) + " sub maps, got " +
                std::to_string(sub_maps.size()));
  const std::size_t ch = main_map.dim(0), side = plan.slice_side(), w = plan.map_side();
  const Shape sub_shape{ch, side, side};
  Tensor out = main_map;
  for (std::size_t k = 0; k < sub_maps.size(); ++k) {
    if (sub_maps[k].shape() != sub_shape)
      throw_shape("fuse: region " + region_name(plan, k) + " sub map is " + shape_str(sub_maps[k].shape()) +
                  ", expected " + shape_str(sub_shape));
    const Slice& s = plan.slices()[k];
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < side; ++y) {
        double* dst = out.raw() + (c * w + s.row_begin + y) * w + s.col_begin;
        const double* src = sub_maps[k].raw() + (c * side + y) * side;
        for (std::size_t x = 0; x < side; ++x) dst[x] += src[x];
      }
  }
  return out;
}

FuseGrads fuse_backward(const Tensor& upstream, const FusionPlan& plan) {
  check_map(upstream, plan, "fuse_backward: upstream gradient");
  const std::size_t ch = upstream.dim(0), side = plan.slice_side(), w = plan.map_side();
  FuseGrads g{upstream, {}};
  g.grad_subs.reserve(plan.region_count());
  for (const Slice& s : plan.slices()) {
    Tensor sub({ch, side, side});
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < side; ++y) {
        const double* src = upstream.raw() + (c * w + s.row_begin + y) * w + s.col_begin;
        std::copy(src, src + side, sub.raw() + (c * side + y) * side);
      }
    g.grad_subs.push_back(std::move(sub));
  }
  return g;
}

}  // namespace rmfn
