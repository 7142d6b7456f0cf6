#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedecg/cost.hpp"
#include "fedecg/error.hpp"
#include "fedecg/metrics.hpp"
#include "fedecg/random.hpp"
#include "support/metrics_oracle.hpp"

using namespace fedecg;

TEST_SUITE("metrics") {
  TEST_CASE("perfect predictions give a diagonal matrix") {
    const std::vector<std::size_t> y = {0, 1, 2, 3, 4, 4, 2};
    const ConfusionMatrix cm = confusion(y, y);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if (i != j) CHECK(cm.counts[i][j] == 0);
    const MetricsReport r = report(cm);
    CHECK(r.accuracy == 1.0);
    for (const auto& c : r.per_class) {
      CHECK(c.precision == 1.0);
      CHECK(c.recall == 1.0);
      CHECK(c.f1 == 1.0);
    }
  }

  TEST_CASE("a constant predictor fills one column") {
    std::vector<std::size_t> y, p;
    for (std::size_t c = 0; c < 5; ++c)
      for (int k = 0; k < 10; ++k) {
        y.push_back(c);
        p.push_back(0);
      }
    const ConfusionMatrix cm = confusion(y, p);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(cm.counts[i][0] == 10);
      for (std::size_t j = 1; j < 5; ++j) CHECK(cm.counts[i][j] == 0);
    }
    const MetricsReport r = report(cm);
    CHECK(r.accuracy == doctest::Approx(0.2));
    CHECK(r.per_class[1].precision_undefined);
    CHECK(r.per_class[1].precision == 0.0);
    CHECK_FALSE(r.per_class[0].precision_undefined);
  }

  TEST_CASE("closed forms for TP=90, FP=10, FN=10") {
    ConfusionMatrix cm;
    cm.counts[2][2] = 90;
    cm.counts[0][2] = 10;  // false positives for class 2
    cm.counts[2][1] = 10;  // false negatives for class 2
    cm.counts[0][0] = 40;
    const ClassMetrics m = report(cm).per_class[2];
    CHECK(m.precision == doctest::Approx(0.9));
    CHECK(m.recall == doctest::Approx(0.9));
    CHECK(m.f1 == doctest::Approx(0.9));
    CHECK(cm.true_negatives(2) == 40);
    CHECK(cm.total() == 150);
  }

  TEST_CASE("random labels agree with a per-sample counter") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<std::size_t> y(1000), p(1000);
      for (std::size_t i = 0; i < 1000; ++i) {
        y[i] = rng.below(5);
        p[i] = rng.below(5);
      }
      CHECK(testing::max_metric_deviation(y, p) <= 1e-12);
    }
  }

  TEST_CASE("confusion matrices add") {
    const std::vector<std::size_t> a = {0, 1}, b = {1, 1};
    ConfusionMatrix cm = confusion(a, b);
    cm += confusion(a, a);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[1][1] == 2);
    CHECK(cm.counts[0][0] == 1);
  }

  TEST_CASE("invalid input") {
    const std::vector<std::size_t> a = {0, 1}, b = {1};
    CHECK_THROWS_AS(confusion(a, b), Error);
    CHECK_THROWS_AS(confusion(std::vector<std::size_t>{}, std::vector<std::size_t>{}), Error);
    CHECK_THROWS_AS(confusion(std::vector<std::size_t>{5}, std::vector<std::size_t>{0}), Error);
    CHECK_THROWS_AS(report(ConfusionMatrix{}), Error);
  }

  TEST_CASE("report formatting") {
    const std::vector<std::size_t> y = {0, 1, 2, 3, 4};
    const MetricsReport r = report(confusion(y, y), 0.0125);
    const std::string csv = format_report_csv(r);
    CHECK(csv.rfind("class,precision,recall,f1\n", 0) == 0);
    CHECK(csv.find("accuracy") != std::string::npos);
    const std::string table = format_report_table(r, "test");
    for (char c : {'N', 'S', 'V', 'F', 'Q'}) CHECK(table.find(c) != std::string::npos);
    CHECK(table.find("0.0125") != std::string::npos);
  }
}

TEST_SUITE("cost") {
  TEST_CASE("reference counts") {
    const CostReport full = compute_tpc(kReferenceCounts, false);
    CHECK(full.tpc_full == 425872);
    CHECK(full.tpc_filtered == 35092);
    CHECK(full.tpc == 425872);
    CHECK(full.ratio == 1.0);
    const CostReport sel = compute_tpc(kReferenceCounts, true);
    CHECK(sel.tpc == 35092);
    CHECK(std::abs(sel.ratio - 0.0824) <= 1e-4);
    CHECK(sel.aggregated.w1 == kReferenceCounts.w1);
    const std::string text = format_cost_report(sel);
    for (const char* s : {"425872", "35092", "8.24%"}) CHECK(text.find(s) != std::string::npos);
  }

  TEST_CASE("architecture counts") {
    const TpcCounts c = architecture_counts();
    CHECK(c.w1 == 7840);
    CHECK(c.w2 == 8561);
    CHECK(c.wc1 == 12352);
    CHECK(c.wc2 == 201029);
    CHECK(compute_tpc(c, false).tpc_full == 2 * (7840 + 8561 + 12352 + 201029));
  }

  TEST_CASE("nonpositive counts are rejected") {
    TpcCounts c = kReferenceCounts;
    c.wc1 = 0;
    CHECK_THROWS_AS(compute_tpc(c, true), Error);
  }
}
