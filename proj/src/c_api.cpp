#include "rmfn/rmfn.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "rmfn/app.hpp"
#include "rmfn/checkpoint.hpp"
#include "rmfn/error.hpp"

struct rmfn_run_config {
  rmfn::RunConfig value;
};

struct rmfn_model {
  rmfn::RmfnModel value;
};

namespace {

thread_local std::string g_last_error;

rmfn_status status_of(rmfn::ErrorCode code) {
  switch (code) {
    case rmfn::ErrorCode::kInvalidArgument: return RMFN_INVALID_ARGUMENT;
    case rmfn::ErrorCode::kShape: return RMFN_SHAPE;
    case rmfn::ErrorCode::kIo: return RMFN_IO;
    case rmfn::ErrorCode::kFormat: return RMFN_FORMAT;
    case rmfn::ErrorCode::kNumeric: return RMFN_NUMERIC;
    case rmfn::ErrorCode::kState: return RMFN_STATE;
    case rmfn::ErrorCode::kBusy: return RMFN_BUSY;
  }
  return RMFN_INTERNAL;
}

rmfn_status fail(rmfn_status status, std::string message) {
  // Keep it on one line; the CLI prints it verbatim.
  for (char& c : message)
    if (c == '\n' || c == '\r') c = ' ';
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
rmfn_status guard(Fn&& fn) {
  try {
    fn();
    return RMFN_OK;
  } catch (const rmfn::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RMFN_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RMFN_INTERNAL, e.what());
  } catch (...) {
    return fail(RMFN_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* name) {
  if (!p) rmfn::throw_invalid(std::string(name) + " must not be NULL");
}

rmfn_status copy_out(const std::string& text, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (capacity < text.size() + 1)
    return fail(RMFN_BUFFER_TOO_SMALL, "buffer needs " + std::to_string(text.size() + 1) + " bytes");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return RMFN_OK;
}

void fill(rmfn_metrics* out, const std::string& model, const rmfn::MetricsReport& r) {
  *out = rmfn_metrics{};
  out->tp = r.tp;
  out->fp = r.fp;
  out->tn = r.tn;
  out->fn = r.fn;
  auto put = [](const std::optional<double>& v, int* has, double* value) {
    *has = v.has_value();
    *value = v.value_or(0.0);
  };
  put(r.precision, &out->has_precision, &out->precision);
  put(r.recall, &out->has_recall, &out->recall);
  put(r.f1, &out->has_f1, &out->f1);
  put(r.accuracy, &out->has_accuracy, &out->accuracy);
  std::strncpy(out->model, model.c_str(), sizeof out->model - 1);
}

}  // namespace

extern "C" {

const char* rmfn_last_error(void) { return g_last_error.c_str(); }

const char* rmfn_status_name(rmfn_status status) {
  switch (status) {
    case RMFN_OK: return "ok";
    case RMFN_INVALID_ARGUMENT: return "invalid_argument";
    case RMFN_SHAPE: return "shape";
    case RMFN_IO: return "io";
    case RMFN_FORMAT: return "format";
    case RMFN_NUMERIC: return "numeric";
    case RMFN_STATE: return "state";
    case RMFN_BUSY: return "busy";
    case RMFN_BUFFER_TOO_SMALL: return "buffer_too_small";
    case RMFN_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rmfn_version(void) { return "0.1.0"; }

rmfn_status rmfn_run_config_create(rmfn_run_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new rmfn_run_config{};
  });
}

rmfn_status rmfn_run_config_load(const char* path, rmfn_run_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new rmfn_run_config{rmfn::load_run_config(path)};
  });
}

rmfn_status rmfn_run_config_parse(const char* text, rmfn_run_config** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = new rmfn_run_config{rmfn::parse_run_config(text)};
  });
}

rmfn_status rmfn_run_config_set(rmfn_run_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    rmfn::set_option(config->value, key, value);
  });
}

rmfn_status rmfn_run_config_get(const rmfn_run_config* config, const char* key, char* buffer, size_t capacity,
                                size_t* needed) {
  std::string text;
  const rmfn_status s = guard([&] {
    require(config, "config");
    require(key, "key");
    text = rmfn::get_option(config->value, key);
  });
  return s == RMFN_OK ? copy_out(text, buffer, capacity, needed) : s;
}

rmfn_status rmfn_run_config_format(const rmfn_run_config* config, char* buffer, size_t capacity, size_t* needed) {
  std::string text;
  const rmfn_status s = guard([&] {
    require(config, "config");
    text = rmfn::format_run_config(config->value);
  });
  return s == RMFN_OK ? copy_out(text, buffer, capacity, needed) : s;
}

rmfn_status rmfn_run_config_validate(const rmfn_run_config* config, int check_data) {
  return guard([&] {
    require(config, "config");
    rmfn::validate(config->value, check_data != 0);
  });
}

void rmfn_run_config_free(rmfn_run_config* config) { delete config; }

rmfn_status rmfn_cmd_gen(const rmfn_run_config* config) {
  return guard([&] {
    require(config, "config");
    rmfn::app::cmd_gen(config->value);
  });
}

rmfn_status rmfn_cmd_train(const rmfn_run_config* config, rmfn_epoch_callback callback, void* user) {
  return guard([&] {
    require(config, "config");
    rmfn::app::cmd_train(config->value, [&](const rmfn::EpochRecord& r) {
      if (!callback) return;
      const rmfn_epoch e{r.epoch, r.train_loss, r.train_acc, r.test_acc.has_value(), r.test_acc.value_or(0.0)};
      callback(&e, user);
    });
  });
}

rmfn_status rmfn_cmd_eval(const rmfn_run_config* config, const char* checkpoint, rmfn_metrics* out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    const auto r = rmfn::app::cmd_eval(config->value, checkpoint ? checkpoint : "");
    fill(out, r.model_name, r.report);
  });
}

rmfn_status rmfn_metrics_from_counts(size_t tp, size_t fp, size_t tn, size_t fn, rmfn_metrics* out) {
  return guard([&] {
    require(out, "out");
    fill(out, "", rmfn::metrics_from_counts(tp, fp, tn, fn));
  });
}

rmfn_status rmfn_format_metrics_table(const rmfn_metrics* rows, size_t count, char* buffer, size_t capacity,
                                      size_t* needed) {
  std::string text;
  const rmfn_status s = guard([&] {
    if (count) require(rows, "rows");
    text = rmfn::metrics_table_header() + "\n";
    for (size_t i = 0; i < count; ++i) {
      const rmfn_metrics& m = rows[i];
      // Fractions are recomputed from the counts so the row cannot disagree
      // with them.
      const std::string name(m.model, strnlen(m.model, sizeof m.model));
      text += rmfn::metrics_table_row(name, rmfn::metrics_from_counts(m.tp, m.fp, m.tn, m.fn)) + "\n";
    }
  });
  return s == RMFN_OK ? copy_out(text, buffer, capacity, needed) : s;
}

rmfn_status rmfn_validate_overlap(long grid, long region_side, long overlap, long input_side, int* valid,
                                  long* residual) {
  return guard([&] {
    const auto c = rmfn::validate_overlap(grid, region_side, overlap, input_side);
    if (valid) *valid = c.valid;
    if (residual) *residual = c.residual;
  });
}

rmfn_status rmfn_geometry_report(long g1, long l1, long g2, long l2, long eps, long l0, char* buffer,
                                 size_t capacity, size_t* needed) {
  std::string text;
  const rmfn_status s = guard([&] { text = rmfn::app::geometry_report(g1, l1, g2, l2, eps, l0); });
  return s == RMFN_OK ? copy_out(text, buffer, capacity, needed) : s;
}

rmfn_status rmfn_cmd_heatmap(const char* checkpoint, const char* image_pgm, const char* out_pgm, double weight) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(image_pgm, "image_pgm");
    require(out_pgm, "out_pgm");
    rmfn::app::cmd_heatmap(checkpoint, image_pgm, out_pgm, weight);
  });
}

rmfn_status rmfn_model_create(const rmfn_run_config* config, rmfn_model** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = new rmfn_model{rmfn::build_model(rmfn::model_config(config->value), config->value.train.seed)};
  });
}

rmfn_status rmfn_model_load(const char* checkpoint, rmfn_model** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = new rmfn_model{rmfn::load_checkpoint(checkpoint)};
  });
}

rmfn_status rmfn_model_save(const rmfn_model* model, const char* checkpoint) {
  return guard([&] {
    require(model, "model");
    require(checkpoint, "checkpoint");
    rmfn::save_checkpoint(model->value, checkpoint);
  });
}

rmfn_status rmfn_model_input_shape(const rmfn_model* model, size_t* channels, size_t* side) {
  return guard([&] {
    require(model, "model");
    if (channels) *channels = model->value.config().input_channels;
    if (side) *side = static_cast<size_t>(model->value.config().input_side);
  });
}

rmfn_status rmfn_model_parameter_count(const rmfn_model* model, size_t* count) {
  return guard([&] {
    require(model, "model");
    require(count, "count");
    *count = model->value.params().parameter_count();
  });
}

rmfn_status rmfn_model_forward(const rmfn_model* model, const double* image, size_t length, double logits[2],
                               int* decision) {
  return guard([&] {
    require(model, "model");
    require(image, "image");
    const auto& cfg = model->value.config();
    const auto side = static_cast<size_t>(cfg.input_side);
    const rmfn::Shape shape{cfg.input_channels, side, side};
    if (length != rmfn::shape_numel(shape))
      rmfn::throw_shape("image has " + std::to_string(length) + " values, the model expects " +
                        rmfn::shape_str(shape));
    const rmfn::Tensor input(shape, std::vector<double>(image, image + length));
    const auto r = model->value.forward(input, rmfn::Mode::kInfer);
    if (logits) {
      logits[0] = r.logits[0];
      logits[1] = r.logits[1];
    }
    if (decision) *decision = static_cast<int>(rmfn::decide(r.logits));
  });
}

void rmfn_model_free(rmfn_model* model) { delete model; }

}  // extern "C"
