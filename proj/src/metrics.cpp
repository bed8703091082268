#include "rmfn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "rmfn/error.hpp"

namespace rmfn {
namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

std::string fraction_text(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string percent_cell(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
  return buf;
}

}  // namespace

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  MetricsReport r{tp, fp, tn, fn, {}, {}, {}, {}};
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  r.precision = ratio(d(tp), d(tp + fp));
  r.recall = ratio(d(tp), d(tp + fn));
  if (r.precision && r.recall) r.f1 = ratio(2.0 * *r.precision * *r.recall, *r.precision + *r.recall);
  r.accuracy = ratio(d(tp + tn), d(r.total()));
  return r;
}

std::string format_metrics(const MetricsReport& r) {
  std::string out;
  out += "tp=" + std::to_string(r.tp) + "\n";
  out += "fp=" + std::to_string(r.fp) + "\n";
  out += "tn=" + std::to_string(r.tn) + "\n";
  out += "fn=" + std::to_string(r.fn) + "\n";
  out += "precision=" + fraction_text(r.precision) + "\n";
  out += "recall=" + fraction_text(r.recall) + "\n";
  out += "f1=" + fraction_text(r.f1) + "\n";
  out += "accuracy=" + fraction_text(r.accuracy) + "\n";
  return out;
}

MetricsReport parse_metrics(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto count = [&](const char* key) -> std::size_t {
    try {
      return std::stoul(kv.at(key));
    } catch (const std::exception&) {
      throw_format(std::string("metrics lack a valid '") + key + "'");
    }
  };
  MetricsReport r = metrics_from_counts(count("tp"), count("fp"), count("tn"), count("fn"));
  auto check = [&](const char* key, const std::optional<double>& expected) {
    auto it = kv.find(key);
    if (it == kv.end()) throw_format(std::string("metrics lack '") + key + "'");
    if (it->second == "undefined") {
      if (expected) throw_format(std::string("metrics: ") + key + " is defined by the counts");
      return;
    }
    double stored = 0.0;
    try {
      stored = std::stod(it->second);
    } catch (const std::exception&) {
      throw_format(std::string("metrics: malformed ") + key);
    }
    if (!expected || std::abs(stored - *expected) > 1e-12)
      throw_format(std::string("metrics: stored ") + key + " disagrees with the counts");
  };
  check("precision", r.precision);
  check("recall", r.recall);
  check("f1", r.f1);
  check("accuracy", r.accuracy);
  return r;
}

std::string metrics_table_header() {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s %12s %10s %7s %12s", "model", "precision(%)", "recall(%)", "F1(%)",
                "accuracy(%)");
  return buf;
}

std::string metrics_table_row(const std::string& model, const MetricsReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %12s %10s %7s %12s", model.c_str(), percent_cell(r.precision).c_str(),
                percent_cell(r.recall).c_str(), percent_cell(r.f1).c_str(), percent_cell(r.accuracy).c_str());
  return buf;
}

}  // namespace rmfn
