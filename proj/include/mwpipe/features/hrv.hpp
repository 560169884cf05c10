#pragma once

// Heart-rate variability statistics over an RR interval series (milliseconds).

#include "mwpipe/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace mwpipe::features {

inline constexpr double kTriIndexBinMs = 7.8125;

struct HrvStats {
    std::optional<double> rr_mean, rr_std, rr_min, rr_max;
    std::optional<double> rmssd, sdsd, pnn10, pnn25, pnn50;
    std::optional<double> tri_index;
    std::optional<double> sd1, sd2, sd1_sd2, sdell;
};

[[nodiscard]] inline double pnn(std::span<const double> diffs, double threshold_ms) noexcept {
    const auto n = std::count_if(diffs.begin(), diffs.end(), [&](double d) { return std::abs(d) > threshold_ms; });
    return 100.0 * static_cast<double>(n) / static_cast<double>(diffs.size());
}

/// Interval count over the modal 7.8125 ms bin (bins anchored at 0).
[[nodiscard]] inline double tri_index(std::span<const double> rr) {
    std::map<long long, std::size_t> bins;
    std::size_t modal = 0;
    for (const double v : rr) modal = std::max(modal, ++bins[static_cast<long long>(std::floor(v / kTriIndexBinMs))]);
    return static_cast<double>(rr.size()) / static_cast<double>(modal);
}

/// Mean, min and max need one interval; RRStD and the triangular index two;
/// anything built on successive differences three.
[[nodiscard]] inline HrvStats hrv_stat_features(std::span<const double> rr) {
    HrvStats h;
    if (rr.empty()) return h;
    h.rr_mean = dsp::mean(rr);
    h.rr_min = *std::min_element(rr.begin(), rr.end());
    h.rr_max = *std::max_element(rr.begin(), rr.end());
    if (rr.size() < 2) return h;
    h.rr_std = dsp::pop_std(rr);
    h.tri_index = tri_index(rr);
    if (rr.size() < 3) return h;

    std::vector<double> d(rr.size() - 1);
    for (std::size_t i = 1; i < rr.size(); ++i) d[i - 1] = rr[i] - rr[i - 1];
    double sq = 0.0;
    for (const double v : d) sq += v * v;
    const double rmssd = std::sqrt(sq / static_cast<double>(d.size()));
    h.rmssd = rmssd;
    h.sdsd = dsp::pop_std(d);
    h.pnn10 = pnn(d, 10.0);
    h.pnn25 = pnn(d, 25.0);
    h.pnn50 = pnn(d, 50.0);
    const double sd1 = rmssd / std::numbers::sqrt2;
    const double sd2 = std::sqrt(std::max(0.0, 2.0 * *h.rr_std * *h.rr_std - 0.5 * rmssd * rmssd));
    h.sd1 = sd1;
    h.sd2 = sd2;
    if (sd2 > 0.0) h.sd1_sd2 = sd1 / sd2;
    h.sdell = std::numbers::pi * sd1 * sd2;
    return h;
}

struct HrvBands {
    double vlf = 0.0, lf = 0.0, hf = 0.0, total = 0.0;
};

inline constexpr double kTachogramHz = 4.0;

/// Linearly interpolates (time_s, value) points onto a uniform grid starting at the first point.
[[nodiscard]] inline std::vector<double> resample_linear(std::span<const double> t, std::span<const double> v, double fs) {
    std::vector<double> out;
    if (t.size() < 2) return out;
    const double step = 1.0 / fs;
    std::size_t j = 0;
    for (std::size_t k = 0;; ++k) {
        const double tk = t.front() + static_cast<double>(k) * step;
        if (tk > t.back()) break;
        while (j + 2 < t.size() && t[j + 1] < tk) ++j;
        const double span = t[j + 1] - t[j];
        const double a = span > 0.0 ? (tk - t[j]) / span : 0.0;
        out.push_back(v[j] + a * (v[j + 1] - v[j]));
    }
    return out;
}

/// Band powers (ms^2) of the interpolated tachogram. `interval_times_s[i]` is the time
/// of the beat closing interval i. Requires at least four beats spanning 10 s.
[[nodiscard]] inline std::optional<HrvBands> hrv_frequency(std::span<const double> interval_times_s, std::span<const double> rr_ms) {
    if (rr_ms.size() < 3 || interval_times_s.size() != rr_ms.size()) return std::nullopt;
    const double first_beat = interval_times_s.front() - rr_ms.front() / 1000.0;
    if (interval_times_s.back() - first_beat < 10.0) return std::nullopt;
    const auto tach = resample_linear(interval_times_s, rr_ms, kTachogramHz);
    if (tach.size() < 8) return std::nullopt;
    const auto spec = dsp::welch(tach, kTachogramHz);
    HrvBands b;
    b.vlf = spec.band_power(0.003, 0.04);
    b.lf = spec.band_power(0.04, 0.15);
    b.hf = spec.band_power(0.15, 0.4);
    b.total = b.vlf + b.lf + b.hf;
    return b;
}

} // namespace mwpipe::features
