#include "fedecg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedecg/error.hpp"

namespace fedecg {

namespace {

constexpr double kSampleRate = 125.0;

struct Wave {
  double amplitude;
  double center;  // seconds relative to the R peak
  double width;   // gaussian sigma, seconds
};

struct Morphology {
  std::vector<Wave> waves;
  double next_rr;  // seconds until the next beat's R peak
};

Morphology morphology(std::size_t label, Rng& rng) {
  auto jit = [&](double lo, double hi) { return rng.uniform(lo, hi); };
  switch (label) {
    case 0:  // N
      return {{{0.15 * jit(0.8, 1.2), -0.18 + jit(-0.02, 0.02), 0.025},
               {-0.10 * jit(0.7, 1.3), -0.03, 0.010},
               {1.00, 0.0, 0.012 * jit(0.9, 1.1)},
               {-0.20 * jit(0.7, 1.3), 0.03, 0.012},
               {0.30 * jit(0.8, 1.2), 0.28 + jit(-0.03, 0.03), 0.05 * jit(0.9, 1.1)}},
              jit(0.70, 0.90)};
    case 1:  // S: premature, preceding T still visible, abnormal P, narrow QRS
      return {{{0.28 * jit(0.8, 1.2), -0.30 + jit(-0.03, 0.03), 0.05},
               {-0.09 * jit(0.6, 1.4), -0.11 + jit(-0.02, 0.02), 0.020},
               {1.00, 0.0, 0.012 * jit(0.9, 1.1)},
               {-0.22 * jit(0.7, 1.3), 0.03, 0.012},
               {0.25 * jit(0.8, 1.2), 0.25 + jit(-0.03, 0.03), 0.05}},
              jit(0.95, 1.15)};
    case 2:  // V: no P, wide QRS, discordant T, compensatory pause
      return {{{1.00, 0.0, 0.040 * jit(0.85, 1.15)},
               {-0.55 * jit(0.8, 1.2), 0.09 + jit(-0.01, 0.01), 0.040},
               {-0.35 * jit(0.8, 1.2), 0.36 + jit(-0.04, 0.04), 0.07}},
              jit(1.05, 1.25)};
    case 3:  // F: fusion of normal and ventricular activation
      return {{{0.07 * jit(0.7, 1.3), -0.16, 0.025},
               {1.00, 0.0, 0.024 * jit(0.9, 1.1)},
               {-0.40 * jit(0.8, 1.2), 0.055, 0.025},
               {0.06 * jit(-1.0, 1.0), 0.30, 0.06}},
              jit(0.75, 0.95)};
    default:  // Q: paced, spike before a wide QRS
      return {{{0.70 * jit(0.8, 1.2), -0.06, 0.004},
               {0.90 * jit(0.9, 1.1), 0.0, 0.035 * jit(0.9, 1.1)},
               {-0.30 * jit(0.7, 1.3), 0.07, 0.030},
               {0.25 * jit(0.7, 1.3), 0.33 + jit(-0.03, 0.03), 0.06}},
              jit(0.80, 0.90)};
  }
}

double eval_waves(const std::vector<Wave>& waves, double t) {
  double v = 0.0;
  for (const auto& w : waves) {
    const double z = (t - w.center) / w.width;
    v += w.amplitude * std::exp(-0.5 * z * z);
  }
  return v;
}

}  // namespace

std::array<std::size_t, kNumClasses> mitbih_like_counts(std::size_t total) {
  require(total >= kNumClasses, ErrorCode::kInvalidArgument, "need at least one beat per class");
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t assigned = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(kMitBihClassShare[c] * total)));
    assigned += counts[c];
  }
  require(assigned < total, ErrorCode::kInvalidArgument, "total too small for the class shares");
  counts[0] = total - assigned;
  return counts;
}

BeatRecord synthesize_beat(std::size_t label, Rng& rng) {
  require(label < kNumClasses, ErrorCode::kInvalidArgument, "class index out of range");
  const Morphology beat = morphology(label, rng);
  const double r_time = rng.uniform(0.20, 0.30);
  // The following beat is a normal one; only its P and QRS fall inside the window.
  Rng next_rng(rng.next());
  const Morphology next = morphology(0, next_rng);
  // Long RR intervals are cut short so every window keeps a zero-padded tail.
  const double end_time = std::min(r_time + beat.next_rr + 0.06, (kBeatLength - 8) / kSampleRate);
  const double wander_amp = rng.uniform(0.0, 0.04);
  const double wander_phase = rng.uniform(0.0, 6.283185307179586);

  std::array<double, kBeatLength> raw{};
  std::size_t last = 0;
  for (std::size_t i = 0; i < kBeatLength; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    if (t > end_time) break;
    double v = eval_waves(beat.waves, t - r_time);
    for (std::size_t w = 0; w < 3 && w < next.waves.size(); ++w) {
      v += next.waves[w].amplitude *
           std::exp(-0.5 * std::pow((t - r_time - beat.next_rr - next.waves[w].center) / next.waves[w].width, 2));
    }
    v += wander_amp * std::sin(2.0 * 3.141592653589793 * 0.3 * t + wander_phase);
    v += 0.01 * rng.normal();
    raw[i] = v;
    last = i;
  }
  double lo = raw[0];
  double hi = raw[0];
  for (std::size_t i = 0; i <= last; ++i) {
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  BeatRecord record;
  record.label = static_cast<std::uint8_t>(label);
  for (std::size_t i = 0; i <= last; ++i) record.samples[i] = static_cast<float>((raw[i] - lo) / (hi - lo));
  return record;
}

BeatDataset synthesize_dataset(const std::array<std::size_t, kNumClasses>& counts, std::uint64_t seed) {
  BeatDataset out;
  out.seed = seed;
  Rng rng(seed);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t k = 0; k < counts[c]; ++k) out.records.push_back(synthesize_beat(c, rng));
  }
  // Interleave classes the way a recording would.
  rng.shuffle(std::span<BeatRecord>(out.records));
  return out;
}

}  // namespace fedecg
