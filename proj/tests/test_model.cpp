#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "rmfn/checkpoint.hpp"
#include "rmfn/error.hpp"
#include "rmfn/gradcheck.hpp"
#include "rmfn/model.hpp"
#include "tiny_model.hpp"

using namespace rmfn;

TEST(Variant, ParseAndPrint) {
  EXPECT_EQ(parse_variant("c"), Variant::kRmfnC);
  EXPECT_EQ(parse_variant("rmfn_a"), Variant::kRmfnA);
  EXPECT_EQ(parse_variant("original"), Variant::kOriginal);
  EXPECT_EQ(to_string(Variant::kRmfnB), "rmfn_b");
  EXPECT_THROW(parse_variant("d"), Error);
}

TEST(ShapeChain, DefaultVgg11RmfnC) {
  const ShapeChain s = check_shapes(vgg11_config(Variant::kRmfnC));
  EXPECT_EQ(s.fm1, (Shape{64, 112, 112}));
  EXPECT_EQ(s.fs1, (Shape{64, 16, 16}));
  EXPECT_EQ(s.ff1, (Shape{64, 112, 112}));
  EXPECT_EQ(s.fm2, (Shape{128, 56, 56}));
  EXPECT_EQ(s.fs2, (Shape{128, 12, 12}));
  EXPECT_EQ(s.ff2, (Shape{128, 56, 56}));
  EXPECT_EQ(s.fm3, (Shape{512, 7, 7}));
  EXPECT_EQ(s.logits, (Shape{2}));
}

TEST(ShapeChain, QuarterWidthKeepsTopology) {
  const ShapeChain s = check_shapes(vgg11_config(Variant::kRmfnC, 224, 0.25, 3));
  EXPECT_EQ(s.fm1, (Shape{16, 112, 112}));
  EXPECT_EQ(s.ff2, (Shape{32, 56, 56}));
  EXPECT_EQ(s.fm3, (Shape{128, 7, 7}));
  EXPECT_EQ(s.logits, (Shape{2}));
}

TEST(ShapeChain, CiScaleGrids) {
  const ShapeChain s = check_shapes(vgg11_config(Variant::kRmfnC, 64, 0.25));
  EXPECT_EQ(s.fs1, (Shape{16, 8, 8}));
  EXPECT_EQ(s.ff1, (Shape{16, 32, 32}));
  EXPECT_EQ(s.fs2, (Shape{32, 6, 6}));
  EXPECT_EQ(s.fm3, (Shape{128, 2, 2}));
}

TEST(ShapeChain, OriginalHasNoFusion) {
  const ShapeChain s = check_shapes(vgg11_config(Variant::kOriginal));
  EXPECT_TRUE(s.fs1.empty());
  EXPECT_TRUE(s.ff2.empty());
  EXPECT_EQ(s.fm3, (Shape{512, 7, 7}));
}

TEST(ShapeChain, BadGridIsRejectedBeforeAllocation) {
  RmfnConfig c = vgg11_config(Variant::kRmfnC, 64, 0.25);
  c.scale2 = scale2_grid(3, 24, 3, 64);
  EXPECT_THROW(check_shapes(c), Error);
  EXPECT_THROW(build_model(c, 1), Error);
}

TEST(Forward, ReducedWidthThreeChannelShapes) {
  const RmfnModel model = build_model(vgg11_config(Variant::kRmfnC, 224, 1.0 / 16, 3), 1);
  Rng rng(1);
  ForwardTrace trace;
  const ForwardResult r = model.forward(oracle::random_tensor({3, 224, 224}, rng, 0, 1), Mode::kInfer, nullptr, &trace);
  EXPECT_EQ(trace.ff1, (Shape{4, 112, 112}));
  EXPECT_EQ(trace.ff2, (Shape{8, 56, 56}));
  EXPECT_EQ(r.fm3.shape(), (Shape{32, 7, 7}));
  EXPECT_EQ(r.logits.shape(), (Shape{2}));
}

// Variant lattice: a and b each add one fusion to original; c adds both.
TEST(Variants, StructuralLattice) {
  auto stages = [](Variant v) {
    std::vector<std::string> names;
    for (const Stage* s : build_model(vgg11_config(v, 32, 0.125), 1).active_stages()) names.push_back(s->name());
    return names;
  };
  EXPECT_EQ(stages(Variant::kOriginal), (std::vector<std::string>{"m1", "m2", "m3", "fc"}));
  EXPECT_EQ(stages(Variant::kRmfnA), (std::vector<std::string>{"m1", "m2", "m3", "fc", "s1"}));
  EXPECT_EQ(stages(Variant::kRmfnB), (std::vector<std::string>{"m1", "m2", "m3", "fc", "s2"}));
  EXPECT_EQ(stages(Variant::kRmfnC), (std::vector<std::string>{"m1", "m2", "m3", "fc", "s1", "s2"}));
}

TEST(Forward, ZeroSubNetworksReproduceOriginalBitExactly) {
  RmfnModel c = build_model(vgg11_config(Variant::kRmfnC, 64, 0.25), 21);
  const RmfnModel o = build_model(vgg11_config(Variant::kOriginal, 64, 0.25), 21);
  c.params().for_each([](const std::string& name, ParamSlot& s) {
    if (name.starts_with("s1.") || name.starts_with("s2.")) s.value.fill(0.0);
  });
  Rng rng(5);
  for (int i = 0; i < 4; ++i) {
    const Tensor x = oracle::random_tensor({1, 64, 64}, rng, 0.0, 1.0);
    const ForwardResult rc = c.forward(x, Mode::kInfer);
    const ForwardResult ro = o.forward(x, Mode::kInfer);
    EXPECT_EQ(rc.logits, ro.logits);
    EXPECT_EQ(rc.fm3, ro.fm3);
  }
}

TEST(Forward, RejectsWrongInputSide) {
  const RmfnModel m = build_model(vgg11_config(Variant::kRmfnC, 32, 0.125), 1);
  EXPECT_THROW(m.forward(Tensor({1, 64, 64}), Mode::kInfer), Error);
  EXPECT_THROW(m.forward(Tensor({1, 32, 32}), Mode::kTrain), Error);  // no rng
}

TEST(Forward, DeterministicGivenSeed) {
  const RmfnModel a = build_model(vgg11_config(Variant::kRmfnC, 32, 0.125), 3);
  const RmfnModel b = build_model(vgg11_config(Variant::kRmfnC, 32, 0.125), 3);
  Rng rng(2);
  const Tensor x = oracle::random_tensor({1, 32, 32}, rng, 0, 1);
  Rng ra(9), rb(9);
  EXPECT_EQ(a.forward(x, Mode::kTrain, &ra).logits, b.forward(x, Mode::kTrain, &rb).logits);
}

TEST(Decide, RuleAndTies) {
  EXPECT_EQ(decide(Tensor({2}, std::vector<double>{0.7, 0.3})), Diagnosis::kNormal);
  EXPECT_EQ(decide(Tensor({2}, std::vector<double>{0.3, 0.7})), Diagnosis::kPancreatitis);
  EXPECT_EQ(decide(Tensor({2}, std::vector<double>{0.5, 0.5})), Diagnosis::kPancreatitis);
  EXPECT_THROW(decide(Tensor({2}, std::vector<double>{NAN, 0.0})), Error);
}

// Property: shifting both logits by a constant never changes the decision.
TEST(Decide, InvariantUnderCommonShift) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-5, 5), y = rng.uniform(-5, 5), c = rng.uniform(-100, 100);
    EXPECT_EQ(decide(Tensor({2}, std::vector<double>{x, y})), decide(Tensor({2}, std::vector<double>{x + c, y + c})));
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  RmfnModel m = build_model(tiny_rmfn_config(), 1);
  Rng rng(3);
  ForwardTrace trace;
  m.forward(oracle::random_tensor({3, 16, 16}, rng), Mode::kTrain, &rng, &trace);
  m.backward(trace, Tensor({2}));
  m.params().for_each([](const std::string& name, ParamSlot& s) { EXPECT_EQ(s.grad, Tensor(s.value.shape())) << name; });
  EXPECT_THROW(m.backward(trace, Tensor({2})), Error);  // trace consumed
}

TEST(Backward, TinyRmfnCMatchesFiniteDifferences) {
  const GradCheckReport r = tiny_model_gradcheck(7);
  EXPECT_TRUE(r.finite);
  EXPECT_GT(r.checked, 100u);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Config, SerializeRoundTrip) {
  for (Variant v : {Variant::kOriginal, Variant::kRmfnA, Variant::kRmfnB, Variant::kRmfnC}) {
    const RmfnConfig c = vgg11_config(v, 64, 0.3, 1, 0.25);
    EXPECT_EQ(parse_config(serialize_config(c)), c);
  }
  EXPECT_EQ(parse_config(serialize_config(tiny_rmfn_config())), tiny_rmfn_config());
  EXPECT_THROW(parse_config("variant=rmfn_c\nbogus=1\n"), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const RmfnModel m = build_model(vgg11_config(Variant::kRmfnC, 32, 0.125), 17);
  const std::string bytes = encode_checkpoint(m);
  const RmfnModel back = decode_checkpoint(bytes);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(encode_checkpoint(back), bytes);
  Rng rng(1);
  for (int i = 0; i < 3; ++i) {
    const Tensor x = oracle::random_tensor({1, 32, 32}, rng, 0, 1);
    EXPECT_EQ(back.forward(x, Mode::kInfer).logits, m.forward(x, Mode::kInfer).logits);
  }
}

TEST(Checkpoint, RejectsCorruption) {
  const std::string bytes = encode_checkpoint(build_model(tiny_rmfn_config(), 1));
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), Error);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), Error);
  std::string bad_digest = bytes;
  bad_digest[12] ^= 1;
  EXPECT_THROW(decode_checkpoint(bad_digest), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), Error);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "rmfn_test_model.ckpt";
  const RmfnModel m = build_model(tiny_rmfn_config(), 2);
  save_checkpoint(m, path.string());
  EXPECT_EQ(encode_checkpoint(load_checkpoint(path.string())), encode_checkpoint(m));
  std::filesystem::remove(path);
}
