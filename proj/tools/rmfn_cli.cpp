// rmfn command-line front end. Talks to the library only through rmfn.h.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure. Failures print a
// single "rmfn: error: <status>: <message>" line on stderr.

#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rmfn/rmfn.h"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Failure {
  int exit_code;
};

[[noreturn]] void fail(int exit_code, rmfn_status status, const std::string& message) {
  std::fprintf(stderr, "rmfn: error: %s: %s\n", rmfn_status_name(status), message.c_str());
  throw Failure{exit_code};
}

void check(rmfn_status s, int exit_code = kRuntime) {
  if (s != RMFN_OK) fail(exit_code, s, rmfn_last_error());
}

template <typename Fn>
std::string read_text(Fn&& call) {
  size_t needed = 0;
  rmfn_status s = call(nullptr, 0, &needed);
  if (s != RMFN_OK && s != RMFN_BUFFER_TOO_SMALL) check(s);
  std::string buf(needed, '\0');
  check(call(buf.data(), buf.size(), &needed));
  buf.resize(needed - 1);
  return buf;
}

using ConfigPtr = std::unique_ptr<rmfn_run_config, decltype(&rmfn_run_config_free)>;

// Flags shared by gen/train/eval; applied on top of --config in a fixed order.
struct Overrides {
  std::string config_path;
  std::optional<unsigned long long> seed;
  std::optional<std::string> variant;
  std::optional<double> channel_scale;
  std::optional<long> epochs;
  std::optional<long> batch;
  std::optional<long> input_side;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd, bool model_flags) {
    cmd->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Seed (data.seed for gen, train.seed otherwise)");
    cmd->add_option("--out", out, "Output directory (paths.out_dir)");
    cmd->add_option("--data", data, "Dataset directory (paths.dataset_dir)");
    cmd->add_option("--input-side", input_side, "Input image side in pixels");
    cmd->add_option("--set", sets, "Override any key, e.g. --set data.contrast=0.3")->take_all();
    if (!model_flags) return;
    cmd->add_option("--variant", variant, "Model variant")
        ->check(CLI::IsMember({"original", "a", "b", "c", "rmfn_a", "rmfn_b", "rmfn_c"}));
    cmd->add_option("--channel-scale", channel_scale, "Width multiplier for every layer")->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint path (default <out>/model.ckpt with --out)");
  }

  ConfigPtr build(const char* seed_key) const {
    rmfn_run_config* raw = nullptr;
    check(config_path.empty() ? rmfn_run_config_create(&raw) : rmfn_run_config_load(config_path.c_str(), &raw),
          kUsage);
    ConfigPtr c(raw, rmfn_run_config_free);
    auto set = [&](const std::string& key, const std::string& value) {
      check(rmfn_run_config_set(c.get(), key.c_str(), value.c_str()), kUsage);
    };
    // input_side first: grid overrides in --set are checked against it.
    if (input_side) set("model.input_side", std::to_string(*input_side));
    if (seed) set(seed_key, std::to_string(*seed));
    if (variant) set("model.variant", *variant);
    if (channel_scale) set("model.channel_scale", CLI::detail::to_string(*channel_scale));
    if (epochs) set("train.epochs", std::to_string(*epochs));
    if (batch) set("train.batch", std::to_string(*batch));
    if (data) set("paths.dataset_dir", *data);
    if (out) {
      set("paths.out_dir", *out);
      if (!checkpoint) set("paths.checkpoint", *out + "/model.ckpt");
    }
    if (checkpoint) set("paths.checkpoint", *checkpoint);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(kUsage, RMFN_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'");
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    check(rmfn_run_config_validate(c.get(), std::string(seed_key) == "data.seed"), kUsage);
    return c;
  }
};

std::string percent(int has, double v) {
  if (!has) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

void on_epoch(const rmfn_epoch* e, void*) {
  std::printf("epoch %zu  loss %.6f  train_acc %s  test_acc %s\n", e->epoch, e->train_loss,
              percent(1, e->train_acc).c_str(), percent(e->has_test_acc, e->test_acc).c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-fusion CNN: synthetic data, training, evaluation and heatmaps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rmfn_version()));

  Overrides gen_opts, train_opts, eval_opts;
  CLI::App* gen = app.add_subcommand("gen", "Generate the synthetic lesion dataset and its manifest");
  gen_opts.add_to(gen, false);
  CLI::App* train = app.add_subcommand("train", "Train a model and write trace.tsv plus a checkpoint");
  train_opts.add_to(train, true);
  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint on the test split");
  eval_opts.add_to(eval, true);

  CLI::App* geometry = app.add_subcommand("check-geometry", "Check grid parameters and print the slice table");
  std::vector<long> geo;
  geometry->add_option("values", geo, "Scale-1 grid and side, scale-2 grid, side and overlap, input side")
      ->type_name("G1 L1 G2 L2 EPS L0")
      ->expected(6)
      ->required()
      ->check(CLI::NonNegativeNumber);

  CLI::App* heatmap = app.add_subcommand("heatmap", "Overlay the final feature map on a PGM image");
  std::string heat_ckpt, heat_image, heat_out;
  double heat_weight = 0.5;
  heatmap->add_option("--checkpoint", heat_ckpt, "Trained checkpoint")->required();
  heatmap->add_option("--image", heat_image, "Input PGM")->required();
  heatmap->add_option("-o,--output", heat_out, "Output PGM")->required();
  heatmap->add_option("--weight", heat_weight, "Heatmap blend weight")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (gen->parsed()) {
      ConfigPtr c = gen_opts.build("data.seed");
      check(rmfn_cmd_gen(c.get()));
    } else if (train->parsed()) {
      ConfigPtr c = train_opts.build("train.seed");
      check(rmfn_cmd_train(c.get(), on_epoch, nullptr));
    } else if (eval->parsed()) {
      ConfigPtr c = eval_opts.build("train.seed");
      rmfn_metrics m{};
      check(rmfn_cmd_eval(c.get(), nullptr, &m));
      std::fputs(read_text([&](char* b, size_t n, size_t* need) { return rmfn_format_metrics_table(&m, 1, b, n, need); })
                     .c_str(),
                 stdout);
    } else if (geometry->parsed()) {
      std::fputs(read_text([&](char* b, size_t n, size_t* need) {
                   return rmfn_geometry_report(geo[0], geo[1], geo[2], geo[3], geo[4], geo[5], b, n, need);
                 }).c_str(),
                 stdout);
    } else if (heatmap->parsed()) {
      check(rmfn_cmd_heatmap(heat_ckpt.c_str(), heat_image.c_str(), heat_out.c_str(), heat_weight));
    }
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return 0;
}
