#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmfn/metrics.hpp"
#include "rmfn/model.hpp"

namespace rmfn {

/// SGD with momentum. Defaults are the reference hyperparameters; batch size
/// is usually lowered for CPU runs.
struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  double dropout_rate = 0.5;  // applied when the model is built, not by train()
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

struct LabeledImage {
  Tensor image;  // C x S x S, values in [0, 1]
  int label;     // 0 normal, 1 pancreatitis
};

/// buf <- momentum * buf + grad; value <- value - lr * buf; grad <- 0.
/// Throws (naming the parameter) on a non-finite gradient, before touching
/// any value.
void sgd_step(ParamStore& params, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;  // mean over the epoch, training mode
  double train_acc;
  std::optional<double> test_acc;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffles with Rng::stream(seed, "shuffle") each epoch and draws dropout
/// masks from Rng::stream(seed, "dropout"); batch gradients are the mean over
/// batch items. Deterministic for a given seed.
std::vector<EpochRecord> train(RmfnModel& model, std::span<const LabeledImage> train_set,
                               std::span<const LabeledImage> test_set, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

/// Inference-mode confusion counts and derived metrics.
MetricsReport evaluate(const RmfnModel& model, std::span<const LabeledImage> samples);

/// Tab-separated: epoch, train_loss, train_acc, test_acc.
std::string format_trace(const std::vector<EpochRecord>& trace);

}  // namespace rmfn
