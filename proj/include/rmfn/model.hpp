#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmfn/params.hpp"
#include "rmfn/region.hpp"
#include "rmfn/stage.hpp"

namespace rmfn {

/// Which fusions are active: original uses none, A only scale 1, B only
/// scale 2, C both.
enum class Variant { kOriginal, kRmfnA, kRmfnB, kRmfnC };

std::string to_string(Variant v);
/// Accepts "original", "rmfn_a".."rmfn_c" and the short forms "a".."c".
Variant parse_variant(const std::string& text);

struct RmfnConfig {
  Variant variant = Variant::kRmfnC;
  long input_side = 224;
  std::size_t input_channels = 1;
  double channel_scale = 1.0;
  double dropout_rate = 0.5;
  // Subtracted from every pixel before any stage sees the image. Inputs live
  // in [0, 1]; centering them is what lets the deep plain stacks start
  // learning at the reference learning rate.
  double input_offset = 0.5;

  std::vector<LayerSpec> m1, m2, m3;  // main network stages
  std::vector<LayerSpec> s1, s2;      // sub-networks, weights shared across regions
  std::vector<LayerSpec> fc;          // classifier head on flattened FM3

  GridSpec scale1;
  GridSpec scale2;

  bool uses_scale1() const { return variant == Variant::kRmfnA || variant == Variant::kRmfnC; }
  bool uses_scale2() const { return variant == Variant::kRmfnB || variant == Variant::kRmfnC; }

  friend bool operator==(const RmfnConfig&, const RmfnConfig&) = default;
};

struct GridPair {
  GridSpec scale1;
  GridSpec scale2;
};

/// Grid geometry for an input side: 224 gives 7x7 regions of 32 px and 5x5
/// regions of 48 px overlapping by 4. Other sides supported: 64 and 32.
GridPair default_grids(long input_side);

/// VGG11-based stacks. channel_scale multiplies every conv width and the
/// two hidden FC widths (rounded, at least 1); the output layer stays 2.
RmfnConfig vgg11_config(Variant variant, long input_side = 224, double channel_scale = 1.0,
                        std::size_t input_channels = 1, double dropout_rate = 0.5);
RmfnConfig vgg11_config(Variant variant, long input_side, double channel_scale, std::size_t input_channels,
                        double dropout_rate, const GridPair& grids);

/// Line-oriented "key=value" text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RmfnConfig& config);
RmfnConfig parse_config(const std::string& text);

/// One scale's sub-network plus its crop/fusion geometry.
class FusionBranch {
 public:
  struct Cache {
    std::vector<StageCache> regions;
  };

  FusionBranch(Stage sub, const GridSpec& grid);

  const Stage& stage() const { return stage_; }
  const GridSpec& grid() const { return grid_; }
  const FusionPlan& plan() const { return plan_; }

  /// Runs the sub-network on every crop of `image` and fuses the results
  /// into `main_map`.
  Tensor forward(const ParamStore& store, const Tensor& image, const Tensor& main_map, Cache* cache) const;
  /// Accumulates sub-network gradients over all regions; returns the
  /// gradient with respect to main_map.
  Tensor backward(ParamStore& store, const Cache& cache, const Tensor& grad_fused) const;

 private:
  Stage stage_;
  GridSpec grid_;
  FusionPlan plan_;
};

struct ShapeChain {
  Shape fm1, fs1, ff1, fm2, fs2, ff2, fm3, logits;  // fs*/ff* empty when inactive
};

struct ForwardTrace {
  bool valid = false;
  StageCache m1, m2, m3, fc;
  FusionBranch::Cache b1, b2;
  Shape ff1, ff2;
};

struct ForwardResult {
  Tensor logits;  // (x, y): x scores normal, y scores pancreatitis
  Tensor fm3;
};

enum class Diagnosis { kNormal = 0, kPancreatitis = 1 };

/// x > y means normal; anything else, ties included, is pancreatitis.
Diagnosis decide(const Tensor& logits);
std::string to_string(Diagnosis d);

class RmfnModel {
 public:
  /// Validates the whole shape chain and the parameter set. Parameters must
  /// cover exactly the layers the configuration needs.
  RmfnModel(RmfnConfig config, ParamStore params);

  const RmfnConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ShapeChain& shapes() const { return shapes_; }

  const Stage& m1() const { return m1_; }
  const Stage& m2() const { return m2_; }
  const Stage& m3() const { return m3_; }
  const Stage& fc() const { return fc_; }
  const std::optional<FusionBranch>& branch1() const { return branch1_; }
  const std::optional<FusionBranch>& branch2() const { return branch2_; }

  /// `rng` drives dropout and is required in training mode.
  ForwardResult forward(const Tensor& image, Mode mode, Rng* rng = nullptr, ForwardTrace* trace = nullptr) const;

  /// Accumulates gradients into params(); the trace is consumed.
  void backward(ForwardTrace& trace, const Tensor& grad_logits);

  /// Main stages, then the sub-networks of the active fusions.
  std::vector<const Stage*> active_stages() const;

 private:
  RmfnConfig config_;
  ParamStore params_;
  Stage m1_, m2_, m3_, fc_;
  std::optional<FusionBranch> branch1_, branch2_;
  ShapeChain shapes_;
};

/// Shape algebra over the whole dataflow; throws naming the failing stage.
ShapeChain check_shapes(const RmfnConfig& config);

/// Builds stages, validates every shape and initializes parameters from seed.
RmfnModel build_model(const RmfnConfig& config, std::uint64_t seed);

}  // namespace rmfn
