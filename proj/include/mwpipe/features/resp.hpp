#pragma once

#include "mwpipe/dsp.hpp"

#include <optional>
#include <span>

namespace mwpipe::features {

struct RespFeatures {
    double rate_bpm = 0.0;
    double lf_power = 0.0;
    double hf_power = 0.0;
    std::optional<double> power_ratio;
};

/// Breath rate from positive-going crossings of the window mean; LF 0.05-0.15 Hz and
/// HF 0.15-0.5 Hz band powers of the mean-removed waveform.
[[nodiscard]] inline RespFeatures resp_features(std::span<const double> x, double fs, double window_s) {
    RespFeatures r;
    if (x.size() < 2 || !(window_s > 0.0)) return r;
    const double m = dsp::mean(x);
    int crossings = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i - 1] < m && x[i] >= m) ++crossings;
    r.rate_bpm = 60.0 * crossings / window_s;
    const auto spec = dsp::welch(x, fs);
    r.lf_power = spec.band_power(0.05, 0.15);
    r.hf_power = spec.band_power(0.15, 0.5);
    if (r.hf_power > 0.0) r.power_ratio = r.lf_power / r.hf_power;
    return r;
}

} // namespace mwpipe::features
