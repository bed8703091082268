#include "rmfn/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "rmfn/error.hpp"

namespace rmfn {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) throw_invalid("learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw_invalid("momentum must be in [0,1)");
  if (cfg.batch_size < 1) throw_invalid("batch_size must be >= 1");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) throw_invalid("dropout_rate must be in [0,1)");
}

void sgd_step(ParamStore& params, const TrainConfig& cfg) {
  validate(cfg);
  params.for_each([](const std::string& name, const ParamSlot& slot) {
    if (!slot.grad.all_finite()) throw_numeric("non-finite gradient in " + name);
  });
  params.for_each([&](const std::string&, ParamSlot& slot) {
    for (std::size_t i = 0; i < slot.value.size(); ++i) {
      slot.momentum[i] = cfg.momentum * slot.momentum[i] + slot.grad[i];
      slot.value[i] -= cfg.learning_rate * slot.momentum[i];
      slot.grad[i] = 0.0;
    }
  });
}

std::vector<EpochRecord> train(RmfnModel& model, std::span<const LabeledImage> train_set,
                               std::span<const LabeledImage> test_set, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  validate(cfg);
  if (train_set.empty()) throw_invalid("training set is empty");

  Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
  Rng dropout_rng = Rng::stream(cfg.seed, "dropout");
  std::vector<std::size_t> order(train_set.size());
  std::vector<EpochRecord> trace;
  model.params().zero_grads();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t k = start; k < stop; ++k) {
        const LabeledImage& s = train_set[order[k]];
        ForwardTrace ft;
        const ForwardResult fr = model.forward(s.image, Mode::kTrain, &dropout_rng, &ft);
        const CrossEntropy ce = softmax_cross_entropy(fr.logits, s.label);
        if (!std::isfinite(ce.loss)) throw_numeric("non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += ce.loss;
        if (static_cast<int>(decide(fr.logits)) == s.label) ++correct;
        model.backward(ft, ce.grad_logits);
      }
      model.params().scale_grads(1.0 / static_cast<double>(stop - start));
      sgd_step(model.params(), cfg);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    static_cast<double>(correct) / static_cast<double>(order.size()), std::nullopt};
    if (!test_set.empty()) rec.test_acc = evaluate(model, test_set).accuracy;
    trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return trace;
}

MetricsReport evaluate(const RmfnModel& model, std::span<const LabeledImage> samples) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const LabeledImage& s : samples) {
    if (s.label != 0 && s.label != 1) throw_invalid("label must be 0 or 1");
    const bool predicted_positive = decide(model.forward(s.image, Mode::kInfer).logits) == Diagnosis::kPancreatitis;
    const bool positive = s.label == 1;
    if (predicted_positive && positive) ++tp;
    else if (predicted_positive) ++fp;
    else if (positive) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::string format_trace(const std::vector<EpochRecord>& trace) {
  std::string out = "epoch\ttrain_loss\ttrain_acc\ttest_acc\n";
  char buf[160];
  for (const EpochRecord& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t", r.epoch, r.train_loss, r.train_acc);
    out += buf;
    if (r.test_acc) {
      std::snprintf(buf, sizeof buf, "%.9g", *r.test_acc);
      out += buf;
    } else {
      out += "nan";
    }
    out += '\n';
  }
  return out;
}

}  // namespace rmfn
