#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace fedecg {

inline constexpr std::size_t kNumClasses = 5;

/// Beat classes: N normal, S supraventricular ectopic, V ventricular ectopic, F fusion, Q unknown.
inline constexpr std::array<char, kNumClasses> kClassLabels = {'N', 'S', 'V', 'F', 'Q'};

inline char class_label(std::size_t index) { return kClassLabels.at(index); }

inline std::optional<std::size_t> class_index(char label) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassLabels[i] == label) return i;
  }
  return std::nullopt;
}

}  // namespace fedecg
