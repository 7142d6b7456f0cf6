#include "fedecg/cost.hpp"

#include <cstdio>

#include "fedecg/error.hpp"
#include "fedecg/model.hpp"

namespace fedecg {

CostReport compute_tpc(const TpcCounts& counts, bool layer_selection) {
  require(counts.w1 > 0 && counts.w2 > 0 && counts.wc1 > 0 && counts.wc2 > 0, ErrorCode::kInvalidArgument,
          "parameter counts must be positive");
  CostReport r;
  r.uploaded = counts;
  r.aggregated = counts;
  r.tpc_full = counts.w1 + counts.w2 + counts.wc1 + counts.wc2 + r.aggregated.w1 + r.aggregated.w2 +
               r.aggregated.wc1 + r.aggregated.wc2;
  r.tpc_filtered = counts.w1 + counts.wc1 + r.aggregated.w1 + r.aggregated.wc1;
  r.layer_selection = layer_selection;
  r.tpc = layer_selection ? r.tpc_filtered : r.tpc_full;
  r.ratio = static_cast<double>(r.tpc) / static_cast<double>(r.tpc_full);
  return r;
}

TpcCounts architecture_counts() {
  const Model ae = build_autoencoder(0);
  const Model clf = build_classifier(0);
  return {count_parameters(ae.weights(), encoder_layers()), count_parameters(ae.weights(), decoder_layers()),
          count_parameters(clf.weights(), classifier_trainable_conv_layers()),
          count_parameters(clf.weights(), classifier_dense_layers())};
}

std::string format_cost_report(const CostReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "W1 %llu  W2 %llu  WC1 %llu  WC2 %llu\n"
                "TPC without layer selection: %llu\n"
                "TPC with layer selection:    %llu\n"
                "filtered / full:             %.2f%%\n"
                "this run (%s): %llu, ratio %.4f\n",
                static_cast<unsigned long long>(r.uploaded.w1), static_cast<unsigned long long>(r.uploaded.w2),
                static_cast<unsigned long long>(r.uploaded.wc1), static_cast<unsigned long long>(r.uploaded.wc2),
                static_cast<unsigned long long>(r.tpc_full), static_cast<unsigned long long>(r.tpc_filtered),
                100.0 * static_cast<double>(r.tpc_filtered) / static_cast<double>(r.tpc_full),
                r.layer_selection ? "layer selection" : "all layers", static_cast<unsigned long long>(r.tpc),
                r.ratio);
  return buf;
}

}  // namespace fedecg
