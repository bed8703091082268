#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace rmfn {

/// Binary classification summary; pancreatitis (label 1) is the positive
/// class. A fraction whose denominator is zero is left undefined.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision, recall, f1, accuracy;

  std::size_t total() const { return tp + fp + tn + fn; }
};

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// "key=value" lines: counts, then fractions at full precision or "undefined".
std::string format_metrics(const MetricsReport& report);
/// Parses format_metrics output; the fractions are recomputed from the counts
/// and must agree with the stored ones to 1e-12.
MetricsReport parse_metrics(const std::string& text);

/// Table row in percent, e.g. "rmfn_c   90.0   94.7   92.3   92.5".
std::string metrics_table_header();
std::string metrics_table_row(const std::string& model, const MetricsReport& report);

}  // namespace rmfn
