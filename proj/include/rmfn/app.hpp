#pragma once

#include <string>
#include <vector>

#include "rmfn/metrics.hpp"
#include "rmfn/run_config.hpp"
#include "rmfn/train.hpp"

namespace rmfn::app {

// Batch commands behind the CLI. Each one validates the configuration,
// takes out_dir/.rmfn.lock for its duration, echoes the effective config to
// out_dir/<command>.config.ini and appends timestamped lines to
// out_dir/run.log. Everything else it writes is a pure function of the
// configuration. On failure out_dir/INCOMPLETE names the error.

/// Exclusive lock on an output directory (created if missing).
class OutDirLock {
 public:
  explicit OutDirLock(const std::string& out_dir);
  ~OutDirLock();
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  std::string path_;
};

/// Writes the synthetic dataset into paths.dataset_dir.
DatasetManifest cmd_gen(const RunConfig& config);

/// Trains from seed on the dataset's train split, scoring the test split each
/// epoch. Writes out_dir/trace.tsv and paths.checkpoint.
std::vector<EpochRecord> cmd_train(const RunConfig& config, const EpochCallback& on_epoch = {});

struct EvalResult {
  std::string model_name;
  MetricsReport report;
};
/// Scores a checkpoint (paths.checkpoint when empty) on the test split and
/// writes out_dir/metrics.txt.
EvalResult cmd_eval(const RunConfig& config, const std::string& checkpoint = "");

/// Closure residuals, divisibility checks and the feature-map slice table for
/// both scales. Never throws for positive inputs.
std::string geometry_report(long g1, long l1, long g2, long l2, long eps, long l0);

/// Overlay of the FM3 heatmap on a PGM image, written as PGM.
void cmd_heatmap(const std::string& checkpoint, const std::string& image_path, const std::string& out_path,
                 double weight = 0.5);

}  // namespace rmfn::app
