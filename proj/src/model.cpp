#include "rmfn/model.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "rmfn/error.hpp"

namespace rmfn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kOriginal: return "original";
    case Variant::kRmfnA: return "rmfn_a";
    case Variant::kRmfnB: return "rmfn_b";
    case Variant::kRmfnC: return "rmfn_c";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "original") return Variant::kOriginal;
  if (text == "rmfn_a" || text == "a") return Variant::kRmfnA;
  if (text == "rmfn_b" || text == "b") return Variant::kRmfnB;
  if (text == "rmfn_c" || text == "c") return Variant::kRmfnC;
  throw_invalid("unknown variant '" + text + "' (expected original, a, b or c)");
}

std::string to_string(Diagnosis d) { return d == Diagnosis::kNormal ? "normal" : "pancreatitis"; }

Diagnosis decide(const Tensor& logits) {
  expect_shape(logits, {2}, "decide: logits");
  if (!logits.all_finite()) throw_numeric("decide: non-finite logits");
  return logits[0] > logits[1] ? Diagnosis::kNormal : Diagnosis::kPancreatitis;
}

GridPair default_grids(long input_side) {
  switch (input_side) {
    case 224: return {scale1_grid(7, 32, 224), scale2_grid(5, 48, 4, 224)};
    case 64: return {scale1_grid(4, 16, 64), scale2_grid(3, 24, 4, 64)};
    case 32: return {scale1_grid(2, 16, 32), scale2_grid(3, 16, 8, 32)};
    default:
      throw_invalid("no default grid geometry for input side " + std::to_string(input_side) +
                    "; set scale1/scale2 explicitly");
  }
}

RmfnConfig vgg11_config(Variant variant, long input_side, double channel_scale, std::size_t input_channels,
                        double dropout_rate) {
  return vgg11_config(variant, input_side, channel_scale, input_channels, dropout_rate, default_grids(input_side));
}

RmfnConfig vgg11_config(Variant variant, long input_side, double channel_scale, std::size_t input_channels,
                        double dropout_rate, const GridPair& grids) {
  if (!(channel_scale > 0.0 && channel_scale <= 1.0)) throw_invalid("channel_scale must be in (0,1]");
  if (input_side < 32 || input_side % 32) throw_invalid("VGG11 input side must be a positive multiple of 32");
  auto w = [&](std::size_t c) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(c) * channel_scale)));
  };
  using L = LayerSpec;
  RmfnConfig c;
  c.variant = variant;
  c.input_side = input_side;
  c.input_channels = input_channels;
  c.channel_scale = channel_scale;
  c.dropout_rate = dropout_rate;
  c.m1 = {L::conv3(input_channels, w(64)), L::relu(), L::maxpool2()};
  c.m2 = {L::conv3(w(64), w(128)), L::relu(), L::maxpool2()};
  c.m3 = {L::conv3(w(128), w(256)), L::relu(), L::conv3(w(256), w(256)), L::relu(), L::maxpool2(),
          L::conv3(w(256), w(512)), L::relu(), L::conv3(w(512), w(512)), L::relu(), L::maxpool2(),
          L::conv3(w(512), w(512)), L::relu(), L::conv3(w(512), w(512)), L::relu(), L::maxpool2()};
  c.s1 = {L::conv3(input_channels, w(64)), L::relu(), L::maxpool2()};
  c.s2 = {L::conv3(input_channels, w(64)), L::relu(), L::maxpool2(), L::conv3(w(64), w(128)), L::relu(),
          L::maxpool2()};
  const auto side3 = static_cast<std::size_t>(input_side / 32);
  c.fc = {L::linear(w(512) * side3 * side3, w(4096)), L::relu(), L::dropout(dropout_rate),
          L::linear(w(4096), w(4096)), L::relu(), L::dropout(dropout_rate),
          L::linear(w(4096), 2)};
  c.scale1 = grids.scale1;
  c.scale2 = grids.scale2;
  return c;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ',';
    out += to_string(layers[i]);
  }
  return out;
}

std::vector<LayerSpec> split_layers(const std::string& text) {
  std::vector<LayerSpec> layers;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) layers.push_back(parse_layer_spec(item));
  return layers;
}

std::string grid_text(const GridSpec& g) {
  return std::to_string(g.grid) + " " + std::to_string(g.region_side) + " " + std::to_string(g.overlap) + " " +
         std::to_string(g.input_side) + " " + std::to_string(g.divisor);
}

GridSpec parse_grid(const std::string& text) {
  std::istringstream is(text);
  GridSpec g;
  if (!(is >> g.grid >> g.region_side >> g.overlap >> g.input_side >> g.divisor))
    throw_format("bad grid '" + text + "' (expected: G L eps L0 divisor)");
  return g;
}

}  // namespace

std::string serialize_config(const RmfnConfig& c) {
  std::string out;
  out += "variant=" + to_string(c.variant) + "\n";
  out += "input_side=" + std::to_string(c.input_side) + "\n";
  out += "input_channels=" + std::to_string(c.input_channels) + "\n";
  out += "channel_scale=" + format_double(c.channel_scale) + "\n";
  out += "dropout_rate=" + format_double(c.dropout_rate) + "\n";
  out += "input_offset=" + format_double(c.input_offset) + "\n";
  out += "m1=" + join_layers(c.m1) + "\n";
  out += "m2=" + join_layers(c.m2) + "\n";
  out += "m3=" + join_layers(c.m3) + "\n";
  out += "s1=" + join_layers(c.s1) + "\n";
  out += "s2=" + join_layers(c.s2) + "\n";
  out += "fc=" + join_layers(c.fc) + "\n";
  out += "scale1=" + grid_text(c.scale1) + "\n";
  out += "scale2=" + grid_text(c.scale2) + "\n";
  return out;
}

RmfnConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw_format("bad model config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw_format(std::string("model config lacks '") + key + "'");
    return it->second;
  };
  RmfnConfig c;
  try {
    c.variant = parse_variant(get("variant"));
    c.input_side = std::stol(get("input_side"));
    c.input_channels = std::stoul(get("input_channels"));
    c.channel_scale = std::stod(get("channel_scale"));
    c.dropout_rate = std::stod(get("dropout_rate"));
    c.input_offset = std::stod(get("input_offset"));
  } catch (const std::logic_error&) {
    throw_format("model config has a malformed number");
  }
  c.m1 = split_layers(get("m1"));
  c.m2 = split_layers(get("m2"));
  c.m3 = split_layers(get("m3"));
  c.s1 = split_layers(get("s1"));
  c.s2 = split_layers(get("s2"));
  c.fc = split_layers(get("fc"));
  c.scale1 = parse_grid(get("scale1"));
  c.scale2 = parse_grid(get("scale2"));
  return c;
}

FusionBranch::FusionBranch(Stage sub, const GridSpec& grid) : stage_(std::move(sub)), grid_(grid), plan_(grid) {}

Tensor FusionBranch::forward(const ParamStore& store, const Tensor& image, const Tensor& main_map,
                             Cache* cache) const {
  const std::vector<Tensor> crops = crop_regions(image, grid_);
  std::vector<Tensor> subs;
  subs.reserve(crops.size());
  if (cache) cache->regions.assign(crops.size(), StageCache{});
  for (std::size_t k = 0; k < crops.size(); ++k)
    subs.push_back(stage_.forward(store, crops[k], Mode::kInfer, nullptr, cache ? &cache->regions[k] : nullptr));
  return fuse(main_map, subs, plan_);
}

Tensor FusionBranch::backward(ParamStore& store, const Cache& cache, const Tensor& grad_fused) const {
  if (cache.regions.size() != plan_.region_count()) throw_state("fusion branch " + stage_.name() + ": missing cache");
  FuseGrads g = fuse_backward(grad_fused, plan_);
  for (std::size_t k = 0; k < g.grad_subs.size(); ++k) stage_.backward(store, cache.regions[k], g.grad_subs[k]);
  return std::move(g.grad_main);
}

namespace {

void collect_param_layers(const Stage& stage, std::map<std::string, LayerSpec>& out) {
  for (std::size_t i = 0; i < stage.layers().size(); ++i)
    if (stage.layers()[i].has_params()) out.emplace(stage.layer_id(i), stage.layers()[i]);
}

// Checks that the sub-network maps an L x L crop onto exactly the feature
// map slice the plan fuses it into, with matching channels.
void check_branch(const FusionBranch& b, const Shape& main_map, std::size_t in_channels) {
  const FusionPlan& plan = b.plan();
  const std::string where = "fusion " + b.stage().name();
  if (main_map[1] != plan.map_side() || main_map[2] != plan.map_side())
    throw_shape(where + ": main feature map " + shape_str(main_map) + " but the grid fuses into " +
                std::to_string(plan.map_side()) + "x" + std::to_string(plan.map_side()));
  const auto side = static_cast<std::size_t>(b.grid().region_side);
  const Shape sub = b.stage().output_shape({in_channels, side, side});
  const Shape want{main_map[0], plan.slice_side(), plan.slice_side()};
  if (sub.size() == 3 && sub[0] != want[0])
    throw_shape(where + ": sub-network yields " + std::to_string(sub[0]) + " channels, main map has " +
                std::to_string(want[0]));
  if (sub != want)
    throw_shape(where + ": sub-network output " + shape_str(sub) + " does not match slice " + shape_str(want));
}

}  // namespace

ShapeChain check_shapes(const RmfnConfig& c) {
  for (const GridSpec* g : {&c.scale1, &c.scale2}) {
    const OverlapCheck oc = validate_overlap(*g);
    if (!oc.valid)
      throw_invalid("grid " + std::to_string(g->grid) + "x" + std::to_string(g->grid) +
                    ": overlap constraint fails with residual " + std::to_string(oc.residual));
  }
  if (c.input_side < 1 || c.input_channels < 1) throw_invalid("input side and channels must be positive");
  if (c.uses_scale1() && c.scale1.input_side != c.input_side)
    throw_invalid("scale1 grid is laid out for input side " + std::to_string(c.scale1.input_side));
  if (c.uses_scale2() && c.scale2.input_side != c.input_side)
    throw_invalid("scale2 grid is laid out for input side " + std::to_string(c.scale2.input_side));

  ShapeChain shapes;
  const auto side = static_cast<std::size_t>(c.input_side);
  shapes.fm1 = Stage("m1", c.m1).output_shape({c.input_channels, side, side});
  if (shapes.fm1.size() != 3) throw_shape("stage m1 must produce a feature map");
  if (c.uses_scale1()) {
    const FusionBranch b(Stage("s1", c.s1), c.scale1);
    check_branch(b, shapes.fm1, c.input_channels);
    shapes.fs1 = {shapes.fm1[0], b.plan().slice_side(), b.plan().slice_side()};
    shapes.ff1 = shapes.fm1;
  }
  shapes.fm2 = Stage("m2", c.m2).output_shape(shapes.fm1);
  if (shapes.fm2.size() != 3) throw_shape("stage m2 must produce a feature map");
  if (c.uses_scale2()) {
    const FusionBranch b(Stage("s2", c.s2), c.scale2);
    check_branch(b, shapes.fm2, c.input_channels);
    shapes.fs2 = {shapes.fm2[0], b.plan().slice_side(), b.plan().slice_side()};
    shapes.ff2 = shapes.fm2;
  }
  shapes.fm3 = Stage("m3", c.m3).output_shape(shapes.fm2);
  shapes.logits = Stage("fc", c.fc).output_shape(shapes.fm3);
  if (shapes.logits != Shape{2}) throw_shape("stage fc must end in 2 logits, got " + shape_str(shapes.logits));
  return shapes;
}

RmfnModel::RmfnModel(RmfnConfig config, ParamStore params)
    : config_(std::move(config)),
      params_(std::move(params)),
      m1_("m1", config_.m1),
      m2_("m2", config_.m2),
      m3_("m3", config_.m3),
      fc_("fc", config_.fc),
      shapes_(check_shapes(config_)) {
  if (config_.uses_scale1()) branch1_.emplace(Stage("s1", config_.s1), config_.scale1);
  if (config_.uses_scale2()) branch2_.emplace(Stage("s2", config_.s2), config_.scale2);

  std::map<std::string, LayerSpec> needed;
  for (const Stage* s : active_stages()) collect_param_layers(*s, needed);
  for (const auto& [id, spec] : needed) {
    if (!params_.contains(id)) throw_state("missing parameters for layer " + id);
    const LayerParams& p = params_.at(id);
    if (p.weight.value.shape() != spec.weight_shape() || p.bias.value.shape() != spec.bias_shape())
      throw_shape("parameters for layer " + id + " do not match " + to_string(spec));
  }
  for (const auto& [id, p] : params_)
    if (!needed.count(id)) throw_state("unexpected parameters for layer " + id);
}

std::vector<const Stage*> RmfnModel::active_stages() const {
  std::vector<const Stage*> stages{&m1_, &m2_, &m3_, &fc_};
  if (branch1_) stages.push_back(&branch1_->stage());
  if (branch2_) stages.push_back(&branch2_->stage());
  return stages;
}

ForwardResult RmfnModel::forward(const Tensor& image, Mode mode, Rng* rng, ForwardTrace* trace) const {
  const auto side = static_cast<std::size_t>(config_.input_side);
  expect_shape(image, {config_.input_channels, side, side}, "model input");
  if (mode == Mode::kTrain && !rng) throw_state("training-mode forward needs an rng");

  Tensor input = image;
  for (double& v : input.data()) v -= config_.input_offset;

  Tensor x = m1_.forward(params_, input, mode, rng, trace ? &trace->m1 : nullptr);
  if (branch1_) x = branch1_->forward(params_, input, x, trace ? &trace->b1 : nullptr);
  if (trace) trace->ff1 = x.shape();
  x = m2_.forward(params_, x, mode, rng, trace ? &trace->m2 : nullptr);
  if (branch2_) x = branch2_->forward(params_, input, x, trace ? &trace->b2 : nullptr);
  if (trace) trace->ff2 = x.shape();
  ForwardResult r;
  r.fm3 = m3_.forward(params_, x, mode, rng, trace ? &trace->m3 : nullptr);
  r.logits = fc_.forward(params_, r.fm3, mode, rng, trace ? &trace->fc : nullptr);
  if (trace) trace->valid = true;
  return r;
}

void RmfnModel::backward(ForwardTrace& trace, const Tensor& grad_logits) {
  if (!trace.valid) throw_state("backward needs the trace of a fresh forward pass");
  trace.valid = false;
  Tensor g = fc_.backward(params_, trace.fc, grad_logits);
  g = m3_.backward(params_, trace.m3, g);
  if (branch2_) g = branch2_->backward(params_, trace.b2, g);
  g = m2_.backward(params_, trace.m2, g);
  if (branch1_) g = branch1_->backward(params_, trace.b1, g);
  m1_.backward(params_, trace.m1, g);
}

RmfnModel build_model(const RmfnConfig& config, std::uint64_t seed) {
  check_shapes(config);
  ParamStore store;
  Stage("m1", config.m1).init_params(store, seed);
  Stage("m2", config.m2).init_params(store, seed);
  Stage("m3", config.m3).init_params(store, seed);
  Stage("fc", config.fc).init_params(store, seed);
  if (config.uses_scale1()) Stage("s1", config.s1).init_params(store, seed);
  if (config.uses_scale2()) Stage("s2", config.s2).init_params(store, seed);
  return RmfnModel(config, std::move(store));
}

}  // namespace rmfn
