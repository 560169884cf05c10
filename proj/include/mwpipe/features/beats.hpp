#pragma once

// R-peak and systolic-peak detection.

#include "mwpipe/dsp.hpp"
#include "mwpipe/features/window.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace mwpipe::features {

inline constexpr double kMinIntervalMs = 200.0;
inline constexpr double kMaxIntervalMs = 3000.0;

struct BeatConfig {
    double refractory_s = 0.25;
    double threshold_fraction = 0.5;
    double rolling_max_half_s = 2.0;
    double refine_half_s = 0.06;
    double ppg_refine_half_s = 0.10;
};

struct BeatSeries {
    std::vector<double> beat_times_s;     // refined peak times
    std::vector<std::size_t> peak_index;  // nearest sample index into the analysed window
    std::vector<double> intervals_ms;     // successive differences within (200, 3000) ms
    std::vector<double> interval_times_s; // time of the beat closing each kept interval
};

namespace detail {

/// Local maxima of `feature` above an adaptive threshold, thinned by a refractory
/// period that keeps the larger candidate.
[[nodiscard]] inline std::vector<std::size_t> adaptive_peaks(std::span<const double> feature, double fs, const BeatConfig& cfg) {
    const auto n = feature.size();
    std::vector<std::size_t> out;
    if (n < 3) return out;
    const auto rmax = dsp::moving_max(feature, static_cast<std::size_t>(std::lround(cfg.rolling_max_half_s * fs)));
    const auto refractory = static_cast<std::size_t>(std::lround(cfg.refractory_s * fs));
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double v = feature[i];
        if (!(v > 0.0) || v < cfg.threshold_fraction * rmax[i]) continue;
        if (!(v > feature[i - 1] && v >= feature[i + 1])) continue;
        if (!out.empty() && i - out.back() < refractory) {
            if (v > feature[out.back()]) out.back() = i;
            continue;
        }
        out.push_back(i);
    }
    return out;
}

} // namespace detail

/// Builds the interval list from refined beat times, discarding physiologically
/// implausible intervals.
inline void fill_intervals(BeatSeries& b) {
    for (std::size_t i = 1; i < b.beat_times_s.size(); ++i) {
        const double rr = (b.beat_times_s[i] - b.beat_times_s[i - 1]) * 1000.0;
        if (rr > kMinIntervalMs && rr < kMaxIntervalMs) {
            b.intervals_ms.push_back(rr);
            b.interval_times_s.push_back(b.beat_times_s[i]);
        }
    }
}

/// Refines each candidate to the raw-signal maximum within +-half_s with
/// parabolic interpolation; candidates whose maximum sits on the search edge are dropped.
[[nodiscard]] inline BeatSeries refine_peaks(std::span<const double> raw, std::span<const double> times_s, double fs,
                                             std::span<const std::size_t> candidates, double half_s) {
    BeatSeries b;
    const auto n = raw.size();
    const auto half = static_cast<std::size_t>(std::lround(half_s * fs));
    for (const auto c : candidates) {
        const std::size_t lo = c >= half ? c - half : 0;
        const std::size_t hi = std::min(n - 1, c + half);
        std::size_t best = lo;
        for (std::size_t i = lo; i <= hi; ++i)
            if (raw[i] > raw[best]) best = i;
        if (best == 0 || best + 1 >= n || best == lo || best == hi) continue;
        const double off = dsp::parabolic_offset(raw[best - 1], raw[best], raw[best + 1]);
        const double t = times_s[best] + off * (times_s[best + 1] - times_s[best - 1]) / 2.0;
        if (!b.beat_times_s.empty() && t <= b.beat_times_s.back()) continue;
        b.beat_times_s.push_back(t);
        b.peak_index.push_back(best);
    }
    fill_intervals(b);
    return b;
}

/// ECG: 5-25 Hz zero-phase band-pass, squared derivative, adaptive threshold.
[[nodiscard]] inline BeatSeries detect_ecg_beats(std::span<const double> x, std::span<const double> times_s, double fs,
                                                 const BeatConfig& cfg = {}) {
    if (x.size() < 8) return {};
    const auto bp = dsp::bandpass(x, 5.0, 25.0, fs);
    std::vector<double> feat(bp.size(), 0.0);
    for (std::size_t i = 1; i + 1 < bp.size(); ++i) {
        const double d = (bp[i + 1] - bp[i - 1]) * fs / 2.0;
        feat[i] = d * d;
    }
    const auto cand = detail::adaptive_peaks(feat, fs, cfg);
    return refine_peaks(x, times_s, fs, cand, cfg.refine_half_s);
}

/// PPG: 0.5-8 Hz zero-phase band-pass, local maxima under the same adaptive threshold.
[[nodiscard]] inline BeatSeries detect_ppg_beats(std::span<const double> x, std::span<const double> times_s, double fs,
                                                 const BeatConfig& cfg = {}) {
    if (x.size() < 8) return {};
    const auto bp = dsp::bandpass(x, 0.5, std::min(8.0, 0.45 * fs), fs);
    const auto cand = detail::adaptive_peaks(bp, fs, cfg);
    return refine_peaks(x, times_s, fs, cand, cfg.ppg_refine_half_s);
}

enum class CardiacKind { Ecg, Ppg };

[[nodiscard]] inline BeatSeries detect_beats(const Window<ScalarSample>& w, CardiacKind kind, double fs, const BeatConfig& cfg = {}) {
    std::vector<double> x(w.samples.size()), t(w.samples.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = w.samples[i].v;
        t[i] = w.samples[i].t.seconds();
    }
    return kind == CardiacKind::Ecg ? detect_ecg_beats(x, t, fs, cfg) : detect_ppg_beats(x, t, fs, cfg);
}

} // namespace mwpipe::features
