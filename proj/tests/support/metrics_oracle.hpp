#pragma once

// Per-sample counting, independent of the confusion matrix.

#include <algorithm>
#include <cmath>
#include <span>

#include "fedecg/metrics.hpp"

namespace fedecg::testing {

inline double max_metric_deviation(std::span<const std::size_t> y, std::span<const std::size_t> p) {
  const MetricsReport r = report(confusion(y, p));
  double worst = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += y[i] == p[i];
  worst = std::max(worst, std::abs(r.accuracy - static_cast<double>(correct) / static_cast<double>(y.size())));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (p[i] == c && y[i] == c) tp += 1;
      if (p[i] == c && y[i] != c) fp += 1;
      if (p[i] != c && y[i] == c) fn += 1;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    worst = std::max({worst, std::abs(r.per_class[c].precision - precision), std::abs(r.per_class[c].recall - recall),
                      std::abs(r.per_class[c].f1 - f1)});
  }
  return worst;
}

}  // namespace fedecg::testing
