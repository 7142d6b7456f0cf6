#pragma once

#include <array>
#include <cstdint>

#include "fedecg/data.hpp"
#include "fedecg/random.hpp"

namespace fedecg {

/// Relative class frequencies of the public MIT-BIH beat training CSV (N, S, V, F, Q).
inline constexpr std::array<double, kNumClasses> kMitBihClassShare = {
    72471.0 / 87554.0, 2223.0 / 87554.0, 5788.0 / 87554.0, 641.0 / 87554.0, 6431.0 / 87554.0};

/// Per-class counts summing to `total`, following kMitBihClassShare, at least one per class.
std::array<std::size_t, kNumClasses> mitbih_like_counts(std::size_t total);

/// One synthetic beat: P/QRS/T as Gaussian bumps with per-class morphology and
/// per-beat jitter, sampled at 125 Hz, min-max normalized to [0, 1] and zero
/// padded after the following beat, in the layout of the preprocessed MIT-BIH CSV.
BeatRecord synthesize_beat(std::size_t label, Rng& rng);

BeatDataset synthesize_dataset(const std::array<std::size_t, kNumClasses>& counts, std::uint64_t seed);

}  // namespace fedecg
