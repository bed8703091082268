#include "rmfn/app.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "rmfn/checkpoint.hpp"
#include "rmfn/error.hpp"
#include "rmfn/heatmap.hpp"
#include "rmfn/pgm.hpp"

namespace fs = std::filesystem;

namespace rmfn::app {
namespace {

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create directory " + dir + ": " + ec.message());
}

void log_line(const std::string& out_dir, const std::string& message) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  std::ofstream log(fs::path(out_dir) / "run.log", std::ios::app);
  log << stamp << ' ' << message << '\n';
}

template <typename Fn>
auto guarded(const RunConfig& config, const std::string& command, Fn&& fn) {
  validate(config, command == "gen");
  make_dir(config.out_dir);
  OutDirLock lock(config.out_dir);
  const fs::path marker = fs::path(config.out_dir) / "INCOMPLETE";
  std::error_code ec;
  fs::remove(marker, ec);
  write_file((fs::path(config.out_dir) / (command + ".config.ini")).string(), format_run_config(config));
  log_line(config.out_dir, command + " start");
  try {
    auto result = fn();
    log_line(config.out_dir, command + " done");
    return result;
  } catch (const std::exception& e) {
    log_line(config.out_dir, command + " failed: " + e.what());
    std::ofstream(marker) << command << ": " << e.what() << '\n';
    throw;
  }
}

std::string manifest_path(const RunConfig& config) { return (fs::path(config.dataset_dir) / kManifestName).string(); }

}  // namespace

OutDirLock::OutDirLock(const std::string& out_dir) : path_((fs::path(out_dir) / ".rmfn.lock").string()) {
  make_dir(out_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw_busy("output directory " + out_dir + " is locked by another run (" + path_ + ")");
    throw_io("cannot create lock " + path_ + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutDirLock::~OutDirLock() { ::unlink(path_.c_str()); }

DatasetManifest cmd_gen(const RunConfig& config) {
  return guarded(config, "gen", [&] { return generate(synth_spec(config), config.dataset_dir); });
}

std::vector<EpochRecord> cmd_train(const RunConfig& config, const EpochCallback& on_epoch) {
  return guarded(config, "train", [&] {
    const LoadedDataset data = load_dataset(manifest_path(config));
    if (data.manifest.spec.image_side != config.input_side)
      throw_invalid("dataset images are " + std::to_string(data.manifest.spec.image_side) + " px, model expects " +
                    std::to_string(config.input_side));
    RmfnModel model = build_model(model_config(config), config.train.seed);
    auto trace = train(model, data.train, data.test, config.train, [&](const EpochRecord& r) {
      log_line(config.out_dir, "epoch " + std::to_string(r.epoch) + " loss " + std::to_string(r.train_loss));
      if (on_epoch) on_epoch(r);
    });
    write_file((fs::path(config.out_dir) / "trace.tsv").string(), format_trace(trace));
    if (const auto parent = fs::path(config.checkpoint).parent_path(); !parent.empty()) make_dir(parent.string());
    save_checkpoint(model, config.checkpoint);
    return trace;
  });
}

EvalResult cmd_eval(const RunConfig& config, const std::string& checkpoint) {
  return guarded(config, "eval", [&] {
    const RmfnModel model = load_checkpoint(checkpoint.empty() ? config.checkpoint : checkpoint);
    const LoadedDataset data = load_dataset(manifest_path(config));
    EvalResult r{to_string(model.config().variant), evaluate(model, data.test)};
    write_file((fs::path(config.out_dir) / "metrics.txt").string(), format_metrics(r.report));
    write_file((fs::path(config.out_dir) / "metrics_table.txt").string(),
               metrics_table_header() + "\n" + metrics_table_row(r.model_name, r.report) + "\n");
    return r;
  });
}

std::string geometry_report(long g1, long l1, long g2, long l2, long eps, long l0) {
  std::string out;
  auto describe = [&](const char* name, const GridSpec& spec) {
    const OverlapCheck c = validate_overlap(spec);
    out += std::string(name) + ": G=" + std::to_string(spec.grid) + " L=" + std::to_string(spec.region_side) +
           " eps=" + std::to_string(spec.overlap) + " L0=" + std::to_string(spec.input_side) +
           " divisor=" + std::to_string(spec.divisor) + "\n";
    out += "  residual (G-1)*eps - G*L + L0 = " + std::to_string(c.residual) + (c.valid ? " (valid)" : " (INVALID)") +
           "\n";
    const auto d = spec.divisor;
    auto div = [&](const char* what, long v) {
      out += "  " + std::string(what) + "=" + std::to_string(v) + " divisible by " + std::to_string(d) + ": " +
             (v % d == 0 ? "yes" : "no") + "\n";
    };
    div("L", spec.region_side);
    div("L-eps", spec.stride());
    div("eps", spec.overlap);
    div("L0", spec.input_side);
    if (const auto problem = grid_problem(spec)) {
      out += "  no slice table: " + *problem + "\n";
      return;
    }
    const FusionPlan plan(spec);
    out += "  feature map " + std::to_string(plan.map_side()) + "x" + std::to_string(plan.map_side()) +
           ", slice side " + std::to_string(plan.slice_side()) + "\n";
    out += "  index  pixels          feature rows\n";
    for (long m = 1; m <= spec.grid; ++m) {
      const Slice& s = plan.slice({m, 1});
      const long p0 = (m - 1) * spec.stride();
      char line[96];
      std::snprintf(line, sizeof line, "  %5ld  [%4ld, %4ld)    [%4zu, %4zu)\n", m, p0, p0 + spec.region_side,
                    s.row_begin, s.row_end);
      out += line;
    }
  };
  describe("scale 1", scale1_grid(g1, l1, l0));
  describe("scale 2", scale2_grid(g2, l2, eps, l0));
  return out;
}

void cmd_heatmap(const std::string& checkpoint, const std::string& image_path, const std::string& out_path,
                 double weight) {
  const RmfnModel model = load_checkpoint(checkpoint);
  const GrayImage gray = read_pgm(image_path);
  const auto side = static_cast<std::size_t>(model.config().input_side);
  if (gray.width != side || gray.height != side)
    throw_shape("image " + image_path + " is " + std::to_string(gray.width) + "x" + std::to_string(gray.height) +
                ", the model expects " + std::to_string(side) + "x" + std::to_string(side));
  const Tensor image = to_tensor(gray);
  write_pgm(out_path, to_gray(overlay(image, fm3_heatmap(model, image), weight)));
}

}  // namespace rmfn::app
