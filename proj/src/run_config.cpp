#include "rmfn/run_config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <vector>

#include "rmfn/error.hpp"
#include "rmfn/pgm.hpp"

namespace rmfn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof()) throw_invalid("config key " + key + ": malformed value '" + value + "'");
  return v;
}

struct Option {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Option numeric(const char* key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return num(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename S, typename T>
Option nested(const char* key, S RunConfig::*outer, T S::*member) {
  return {key, [key, outer, member](RunConfig& c, const std::string& v) { c.*outer.*member = parse_number<T>(key, v); },
          [outer, member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return num(c.*outer.*member);
            else return std::to_string(c.*outer.*member);
          }};
}

Option text(const char* key, std::string RunConfig::*member) {
  return {key, [member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

// Starting point when only one of the two scales is overridden.
GridPair base_grids(const RunConfig& c) {
  if (c.grids) return *c.grids;
  try {
    return default_grids(c.input_side);
  } catch (const Error&) {
    return {scale1_grid(1, c.input_side, c.input_side), scale2_grid(1, c.input_side, 0, c.input_side)};
  }
}

const std::vector<Option>& options() {
  static const std::vector<Option> table = {
      {"model.variant", [](RunConfig& c, const std::string& v) { c.variant = parse_variant(v); },
       [](const RunConfig& c) { return to_string(c.variant); }},
      numeric("model.input_side", &RunConfig::input_side),
      numeric("model.input_channels", &RunConfig::input_channels),
      numeric("model.channel_scale", &RunConfig::channel_scale),
      {"model.scale1",
       [](RunConfig& c, const std::string& v) {
         std::istringstream is(v);
         long g = 0, l = 0;
         if (!(is >> g >> l) || !(is >> std::ws).eof()) throw_invalid("config key model.scale1: expected 'G L'");
         GridPair p = base_grids(c);
         p.scale1 = scale1_grid(g, l, c.input_side);
         c.grids = p;
       },
       [](const RunConfig& c) {
         const GridSpec s = base_grids(c).scale1;
         return std::to_string(s.grid) + " " + std::to_string(s.region_side);
       }},
      {"model.scale2",
       [](RunConfig& c, const std::string& v) {
         std::istringstream is(v);
         long g = 0, l = 0, e = 0;
         if (!(is >> g >> l >> e) || !(is >> std::ws).eof())
           throw_invalid("config key model.scale2: expected 'G L eps'");
         GridPair p = base_grids(c);
         p.scale2 = scale2_grid(g, l, e, c.input_side);
         c.grids = p;
       },
       [](const RunConfig& c) {
         const GridSpec s = base_grids(c).scale2;
         return std::to_string(s.grid) + " " + std::to_string(s.region_side) + " " + std::to_string(s.overlap);
       }},
      nested("train.learning_rate", &RunConfig::train, &TrainConfig::learning_rate),
      nested("train.momentum", &RunConfig::train, &TrainConfig::momentum),
      nested("train.batch", &RunConfig::train, &TrainConfig::batch_size),
      nested("train.dropout", &RunConfig::train, &TrainConfig::dropout_rate),
      nested("train.epochs", &RunConfig::train, &TrainConfig::epochs),
      nested("train.seed", &RunConfig::train, &TrainConfig::seed),
      nested("data.n_per_class", &RunConfig::data, &SynthSpec::n_per_class),
      nested("data.lesion_min", &RunConfig::data, &SynthSpec::lesion_min),
      nested("data.lesion_max", &RunConfig::data, &SynthSpec::lesion_max),
      nested("data.noise_cell", &RunConfig::data, &SynthSpec::noise_cell),
      nested("data.noise_amplitude", &RunConfig::data, &SynthSpec::noise_amplitude),
      nested("data.grain", &RunConfig::data, &SynthSpec::grain),
      nested("data.contrast", &RunConfig::data, &SynthSpec::contrast),
      nested("data.lesion_texture", &RunConfig::data, &SynthSpec::lesion_texture),
      nested("data.seed", &RunConfig::data, &SynthSpec::seed),
      text("paths.dataset_dir", &RunConfig::dataset_dir),
      text("paths.checkpoint", &RunConfig::checkpoint),
      text("paths.out_dir", &RunConfig::out_dir),
  };
  return table;
}

const Option& find_option(const std::string& key) {
  for (const Option& o : options())
    if (key == o.key) return o;
  throw_invalid("unknown config key '" + key + "'");
}

}  // namespace

GridPair effective_grids(const RunConfig& c) {
  if (c.grids) {
    GridPair p = *c.grids;
    p.scale1.input_side = c.input_side;
    p.scale2.input_side = c.input_side;
    return p;
  }
  return default_grids(c.input_side);
}

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  find_option(key).set(config, trim(value));
}

std::string get_option(const RunConfig& config, const std::string& key) { return find_option(key).get(config); }

RunConfig parse_run_config(const std::string& content) {
  RunConfig c;
  std::istringstream is(content);
  std::string section;
  std::size_t line_no = 0;
  for (std::string raw; std::getline(is, raw);) {
    ++line_no;
    std::string line = raw;
    if (const auto cut = line.find_first_of("#;"); cut != std::string::npos) line.resize(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw_invalid("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw_invalid("config line " + std::to_string(line_no) + ": expected key = value inside a section");
    set_option(c, section + "." + trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string format_run_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const Option& o : options()) {
    const std::string key = o.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + o.get(c) + "\n";
  }
  return out;
}

RmfnConfig model_config(const RunConfig& c) {
  return vgg11_config(c.variant, c.input_side, c.channel_scale, c.input_channels, c.train.dropout_rate,
                      effective_grids(c));
}

SynthSpec synth_spec(const RunConfig& c) {
  SynthSpec s = c.data;
  s.image_side = c.input_side;
  return s;
}

void validate(const RunConfig& c, bool check_data) {
  validate(c.train);
  if (check_data) validate(synth_spec(c));
  if (c.input_channels != 1) throw_invalid("the synthetic data is single-channel; model.input_channels must be 1");
  check_shapes(model_config(c));
  if (c.dataset_dir.empty() || c.out_dir.empty() || c.checkpoint.empty())
    throw_invalid("paths.dataset_dir, paths.checkpoint and paths.out_dir must be set");
}

}  // namespace rmfn
