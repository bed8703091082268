#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rmfn/gradcheck.hpp"
#include "rmfn/model.hpp"

using namespace rmfn;

namespace {

constexpr double kTol = 1e-4;

GradCheckReport check_stage(const std::vector<LayerSpec>& layers, const Shape& input_shape, std::uint64_t seed) {
  const Stage stage("g", layers);
  ParamStore store;
  stage.init_params(store, seed);
  // Nonzero biases so they participate in the check.
  store.for_each([&](const std::string& name, ParamSlot& s) {
    if (name.ends_with(".bias")) {
      Rng r = Rng::stream(seed, name);
      for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] = r.uniform(-0.5, 0.5);
    }
  });
  Rng rng(seed);
  const Tensor x = oracle::random_tensor(input_shape, rng);
  return finite_diff_check(stage, store, x, 1e-5, seed);
}

}  // namespace

TEST(RelativeError, FloorAppliesNearZero) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-12 / 1e-5);
}

TEST(GradCheck, ReluAwayFromKinks) {
  const Stage stage("r", {LayerSpec::relu()});
  ParamStore store;
  Rng rng(3);
  Tensor x = oracle::random_tensor({2, 4, 4}, rng);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < 0.05) x[i] = 0.5;
  const GradCheckReport r = finite_diff_check(stage, store, x);
  EXPECT_TRUE(r.finite);
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(GradCheck, SingleConvOnTwoByTwo) {
  const GradCheckReport r = check_stage({LayerSpec::conv3(1, 1)}, {1, 2, 2}, 1);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
  EXPECT_EQ(r.checked, 9u + 1u + 4u);
}

TEST(GradCheck, ConvThenMaxPoolOnFourByFour) {
  const GradCheckReport r = check_stage({LayerSpec::conv3(1, 2), LayerSpec::maxpool2()}, {1, 4, 4}, 2);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, Linear) {
  const GradCheckReport r = check_stage({LayerSpec::linear(12, 5)}, {3, 2, 2}, 3);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, DropoutIsIdentityInInference) {
  const GradCheckReport r = check_stage({LayerSpec::linear(6, 4), LayerSpec::dropout(0.5)}, {6}, 4);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, ReducedWidthSubNetworkStack) {
  // FCN-S2 shape (conv, relu, pool, conv, relu, pool) on a 3x8x8 crop.
  const GradCheckReport r =
      check_stage({LayerSpec::conv3(3, 4), LayerSpec::relu(), LayerSpec::maxpool2(), LayerSpec::conv3(4, 3),
                   LayerSpec::relu(), LayerSpec::maxpool2()},
                  {3, 8, 8}, 5);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(GradCheck, FcnS1OnThreeByEightByEight) {
  const GradCheckReport r =
      check_stage({LayerSpec::conv3(3, 4), LayerSpec::relu(), LayerSpec::maxpool2()}, {3, 8, 8}, 6);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

// Property: random small stacks (at most four layers, at most 3x8x8) pass.
TEST(GradCheck, RandomSmallStacks) {
  Rng rng(99);
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<LayerSpec> layers;
    std::size_t ch = 1 + rng.below(3), side = 2 << rng.below(3);
    const Shape in{ch, side, side};
    const std::size_t n = 1 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i) {
      const auto pick = rng.below(3);
      if (pick == 0) {
        const std::size_t out = 1 + rng.below(3);
        layers.push_back(LayerSpec::conv3(ch, out));
        ch = out;
      } else if (pick == 1 && side >= 2) {
        layers.push_back(LayerSpec::maxpool2());
        side /= 2;
      } else {
        layers.push_back(LayerSpec::relu());
      }
    }
    const GradCheckReport r = check_stage(layers, in, 100 + trial);
    EXPECT_TRUE(r.finite);
    EXPECT_LT(r.max_rel_error, kTol) << "trial " << trial << " worst " << r.worst;
  }
}

// Shared weights: feeding the same crop to every region multiplies the
// sub-network gradient by G^2 relative to a single region.
TEST(FusionBranchGrad, SharedWeightsAccumulateOverRegions) {
  const Stage sub("s1", {LayerSpec::conv3(1, 2), LayerSpec::relu(), LayerSpec::maxpool2()});
  ParamStore store;
  sub.init_params(store, 12);
  Rng rng(12);
  const Tensor crop = oracle::random_tensor({1, 4, 4}, rng);

  auto sub_grad = [&](long grid) {
    const long side = 4 * grid;
    Tensor image({1, static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
    for (long m = 0; m < grid; ++m)
      for (long n = 0; n < grid; ++n)
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 4; ++j) image.at(0, 4 * m + i, 4 * n + j) = crop.at(0, i, j);
    const FusionBranch branch(sub, scale1_grid(grid, 4, side));
    const std::size_t map = static_cast<std::size_t>(side / 2);
    FusionBranch::Cache cache;
    branch.forward(store, image, Tensor({2, map, map}), &cache);
    store.zero_grads();
    branch.backward(store, cache, Tensor({2, map, map}, 1.0));
    return store.at("s1.0").weight.grad;
  };

  const Tensor one = sub_grad(1);
  const Tensor three = sub_grad(3);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(three[i], 9.0 * one[i], 1e-12 * (1 + std::abs(one[i])));
}
