#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "fedecg/classes.hpp"

namespace fedecg {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  std::uint64_t true_positives(std::size_t c) const { return counts[c][c]; }
  std::uint64_t false_positives(std::size_t c) const;
  std::uint64_t false_negatives(std::size_t c) const;
  std::uint64_t true_negatives(std::size_t c) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(std::span<const std::size_t> true_labels, std::span<const std::size_t> predicted_labels);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the metric had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double accuracy = 0.0;
  std::uint64_t n_evaluated = 0;
  std::optional<double> reconstruction_mae;
};

MetricsReport report(const ConfusionMatrix& cm, std::optional<double> mae = std::nullopt);

/// Aligned plain-text table: one row per class plus overall accuracy.
std::string format_report_table(const MetricsReport& report, const std::string& title);
/// CSV with header `class,precision,recall,f1` and a trailing accuracy row.
std::string format_report_csv(const MetricsReport& report);

}  // namespace fedecg
