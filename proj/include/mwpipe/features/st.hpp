#pragma once

#include "mwpipe/dsp.hpp"

#include <algorithm>
#include <optional>
#include <span>

namespace mwpipe::features {

struct StFeatures {
    double mean = 0.0, median = 0.0, std = 0.0, max = 0.0, min = 0.0;
};

[[nodiscard]] inline std::optional<StFeatures> st_features(std::span<const double> x) {
    if (x.empty()) return std::nullopt;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return StFeatures{dsp::mean(x), dsp::lower_median(x), dsp::pop_std(x), *hi, *lo};
}

} // namespace mwpipe::features
