#pragma once

#include <cstdint>
#include <string>

namespace fedecg {

/// Parameters per communicated leg: encoder (W1), decoder (W2), trainable
/// classifier conv (WC1) and classifier dense layers (WC2).
struct TpcCounts {
  std::uint64_t w1 = 0;
  std::uint64_t w2 = 0;
  std::uint64_t wc1 = 0;
  std::uint64_t wc2 = 0;
};

/// Per-layer counts quoted for the original deployment.
inline constexpr TpcCounts kReferenceCounts{13386, 13429, 4160, 181961};

struct CostReport {
  TpcCounts uploaded;    // W1, W2, WC1, WC2
  TpcCounts aggregated;  // AW1, AW2, AWC1, AWC2
  std::uint64_t tpc_full = 0;
  std::uint64_t tpc_filtered = 0;
  bool layer_selection = false;
  std::uint64_t tpc = 0;  // the figure for the chosen mode
  double ratio = 1.0;     // tpc / tpc_full
};

/// Total parameters communicated per edge and global round, with and without layer selection.
CostReport compute_tpc(const TpcCounts& counts, bool layer_selection);

/// Counts for the autoencoder and classifier built by this library.
TpcCounts architecture_counts();

std::string format_cost_report(const CostReport& report);

}  // namespace fedecg
