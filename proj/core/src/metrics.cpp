#include "fedecg/metrics.hpp"

#include <cstdio>

#include "fedecg/error.hpp"

namespace fedecg {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) {
    for (auto v : row) t += v;
  }
  return t;
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t fp = 0;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (r != c) fp += counts[r][c];
  }
  return fp;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t fn = 0;
  for (std::size_t p = 0; p < kNumClasses; ++p) {
    if (p != c) fn += counts[c][p];
  }
  return fn;
}

std::uint64_t ConfusionMatrix::true_negatives(std::size_t c) const {
  return total() - true_positives(c) - false_positives(c) - false_negatives(c);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    for (std::size_t p = 0; p < kNumClasses; ++p) counts[r][p] += other.counts[r][p];
  }
  return *this;
}

ConfusionMatrix confusion(std::span<const std::size_t> true_labels, std::span<const std::size_t> predicted_labels) {
  require(true_labels.size() == predicted_labels.size(), ErrorCode::kInvalidArgument,
          "label sequences differ in length");
  require(!true_labels.empty(), ErrorCode::kInvalidArgument, "no labels to compare");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    require(true_labels[i] < kNumClasses && predicted_labels[i] < kNumClasses, ErrorCode::kInvalidArgument,
            "label out of range at position " + std::to_string(i));
    ++cm.counts[true_labels[i]][predicted_labels[i]];
  }
  return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricsReport report(const ConfusionMatrix& cm, std::optional<double> mae) {
  MetricsReport r;
  r.n_evaluated = cm.total();
  require(r.n_evaluated > 0, ErrorCode::kInvalidArgument, "confusion matrix is empty");
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    correct += cm.true_positives(c);
    auto& m = r.per_class[c];
    const std::uint64_t tp = cm.true_positives(c);
    m.precision = ratio(tp, tp + cm.false_positives(c), m.precision_undefined);
    m.recall = ratio(tp, tp + cm.false_negatives(c), m.recall_undefined);
    m.f1_undefined = m.precision + m.recall == 0.0;
    m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_evaluated);
  r.reconstruction_mae = mae;
  return r;
}

std::string format_report_table(const MetricsReport& r, const std::string& title) {
  std::string out = title + "\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %10s %10s %10s\n", "class", "precision", "recall", "f1-score");
  out += line;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    std::snprintf(line, sizeof(line), "%-6c %10.4f %10.4f %10.4f%s\n", class_label(c), m.precision, m.recall, m.f1,
                  (m.precision_undefined || m.recall_undefined) ? "  (undefined)" : "");
    out += line;
  }
  std::snprintf(line, sizeof(line), "accuracy %.4f over %llu beats\n", r.accuracy,
                static_cast<unsigned long long>(r.n_evaluated));
  out += line;
  if (r.reconstruction_mae) {
    std::snprintf(line, sizeof(line), "reconstruction MAE %.6f\n", *r.reconstruction_mae);
    out += line;
  }
  return out;
}

std::string format_report_csv(const MetricsReport& r) {
  std::string out = "class,precision,recall,f1\n";
  char line[128];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    std::snprintf(line, sizeof(line), "%c,%.6f,%.6f,%.6f\n", class_label(c), m.precision, m.recall, m.f1);
    out += line;
  }
  std::snprintf(line, sizeof(line), "accuracy,%.6f,,\n", r.accuracy);
  out += line;
  if (r.reconstruction_mae) {
    std::snprintf(line, sizeof(line), "reconstruction_mae,%.6f,,\n", *r.reconstruction_mae);
    out += line;
  }
  return out;
}

}  // namespace fedecg
