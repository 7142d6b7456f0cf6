#pragma once

#include <vector>

#include "fedecg/data.hpp"
#include "fedecg/synthetic.hpp"

namespace fedecg::testing {

// Small balanced synthetic set split across `noise.size()` edges.
inline std::vector<EdgePartition> small_partitions(std::size_t per_class, std::vector<double> noise,
                                                   std::uint64_t seed = 21) {
  const BeatDataset d = synthesize_dataset({per_class, per_class, per_class, per_class, per_class}, seed);
  return partition_edges(d, noise, seed + 1);
}

}  // namespace fedecg::testing
