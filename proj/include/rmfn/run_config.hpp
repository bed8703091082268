#pragma once

#include <optional>
#include <string>

#include "rmfn/model.hpp"
#include "rmfn/synth.hpp"
#include "rmfn/train.hpp"

namespace rmfn {

/// Everything one CLI run needs. Text form is sectioned key/value:
///
///   [model]  variant, input_side, input_channels, channel_scale,
///            scale1 = "G L", scale2 = "G L eps"
///   [train]  learning_rate, momentum, batch, dropout, epochs, seed
///   [data]   n_per_class, lesion_min, lesion_max, noise_cell,
///            noise_amplitude, grain, contrast, lesion_texture, seed
///   [paths]  dataset_dir, checkpoint, out_dir
///
/// '#' and ';' start comments. Relative paths resolve against the working
/// directory. Unknown keys are errors.
struct RunConfig {
  Variant variant = Variant::kRmfnC;
  long input_side = 224;
  std::size_t input_channels = 1;
  double channel_scale = 0.25;
  std::optional<GridPair> grids;  // default_grids(input_side) when unset

  TrainConfig train{0.001, 0.9, 16, 0.5, 20, 1};
  SynthSpec data;

  std::string dataset_dir = "data";
  std::string checkpoint = "out/model.ckpt";
  std::string out_dir = "out";
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Override one value by "section.key", e.g. set_option(c, "train.epochs", "5").
void set_option(RunConfig& config, const std::string& key, const std::string& value);
std::string get_option(const RunConfig& config, const std::string& key);

/// Full effective configuration; parse_run_config(format_run_config(c))
/// reproduces c with grids made explicit.
std::string format_run_config(const RunConfig& config);

GridPair effective_grids(const RunConfig& config);
RmfnConfig model_config(const RunConfig& config);
/// Dataset spec with image_side taken from the model input side.
SynthSpec synth_spec(const RunConfig& config);

/// Throws on any inconsistent value before work starts. The [data] section
/// only matters to dataset generation.
void validate(const RunConfig& config, bool check_data = true);

}  // namespace rmfn
