#pragma once

// Tonic/phasic split of skin conductance and SCR peak statistics.

#include "mwpipe/dsp.hpp"
#include "mwpipe/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace mwpipe::features {

struct EdaConfig {
    double median_window_s = 8.0;
    double onset_slope_uS_per_s = 0.01;
    double min_amplitude_uS = 0.01;
    double min_data_s = 8.0;
};

struct EdaPeak {
    double onset_t = 0.0;
    double peak_t = 0.0;
    double amplitude_uS = 0.0;
    std::optional<double> duration_s; // absent when the signal never returns to half amplitude
    double slope_uS_per_s = 0.0;
};

struct EDADecomposition {
    std::vector<double> times_s;
    std::vector<double> tonic;
    std::vector<double> phasic;
    std::vector<EdaPeak> peaks;
};

/// Onsets and peaks are located on the phasic slope; amplitude and half-recovery are
/// measured trough-to-peak on the conductance itself.
[[nodiscard]] inline std::vector<EdaPeak> detect_scr_peaks(std::span<const double> p, std::span<const double> x,
                                                           std::span<const double> t, double fs, const EdaConfig& cfg) {
    std::vector<EdaPeak> out;
    const auto n = p.size();
    if (n < 3) return out;
    std::vector<double> slope(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) slope[i] = (p[i + 1] - p[i]) * fs;

    std::size_t i = 0;
    while (i + 1 < n) {
        const bool starts = slope[i] > cfg.onset_slope_uS_per_s && (i == 0 || slope[i - 1] <= cfg.onset_slope_uS_per_s);
        if (!starts) {
            ++i;
            continue;
        }
        const std::size_t onset = i;
        std::size_t j = i;
        while (j + 1 < n && slope[j] > 0.0) ++j;
        if (j + 1 >= n && slope[j - 1] > 0.0) break; // still rising at the window end
        const double amp = x[j] - x[onset];
        if (amp >= cfg.min_amplitude_uS) {
            EdaPeak pk{t[onset], t[j], amp, std::nullopt, amp / (t[j] - t[onset])};
            const double half = x[onset] + amp / 2.0;
            for (std::size_t k = j + 1; k < n; ++k) {
                if (x[k] <= half) {
                    const double a = (x[k - 1] - half) / (x[k - 1] - x[k]);
                    pk.duration_s = t[k - 1] + a * (t[k] - t[k - 1]) - t[onset];
                    break;
                }
            }
            out.push_back(pk);
        }
        i = j;
    }
    return out;
}

/// Tonic is a centered moving median with edge replication; phasic is the exact residual.
[[nodiscard]] inline EDADecomposition eda_decompose(std::span<const double> x, std::span<const double> times_s, double fs,
                                                    const EdaConfig& cfg = {}) {
    if (static_cast<double>(x.size()) < cfg.min_data_s * fs)
        throw Error(ErrorCode::WindowTooShort, "EDA decomposition needs at least 8 s of data");
    EDADecomposition d;
    d.times_s.assign(times_s.begin(), times_s.end());
    const auto half = static_cast<std::size_t>(std::lround(cfg.median_window_s * fs / 2.0));
    d.tonic = dsp::moving_median(x, half);
    d.phasic.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d.phasic[i] = x[i] - d.tonic[i];
    d.peaks = detect_scr_peaks(d.phasic, x, d.times_s, fs, cfg);
    return d;
}

struct EdaFeatures {
    double phasic_mean = 0, phasic_std = 0, phasic_range = 0, phasic_auc = 0;
    double tonic_mean = 0, tonic_std = 0, tonic_range = 0, tonic_auc = 0;
    std::optional<double> peak_max, peak_min, peak_mean;
    double peak_quantity = 0;
    std::optional<double> peak_mean_duration, peak_mean_slope;
};

/// Trapezoidal area with the first and last samples held out to the window edges.
[[nodiscard]] inline double held_area(std::span<const double> t, std::span<const double> y, double t_start, double t_end) {
    if (y.empty()) return 0.0;
    return dsp::trapezoid(t, y) + y.front() * (t.front() - t_start) + y.back() * (t_end - t.back());
}

[[nodiscard]] inline EdaFeatures eda_features(const EDADecomposition& d, double t_start, double t_end) {
    EdaFeatures f;
    auto block = [&](const std::vector<double>& v, double& mean, double& sd, double& range, double& auc) {
        if (v.empty()) return;
        mean = dsp::mean(v);
        sd = dsp::pop_std(v);
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        range = *hi - *lo;
        auc = held_area(d.times_s, v, t_start, t_end);
    };
    block(d.phasic, f.phasic_mean, f.phasic_std, f.phasic_range, f.phasic_auc);
    block(d.tonic, f.tonic_mean, f.tonic_std, f.tonic_range, f.tonic_auc);

    f.peak_quantity = static_cast<double>(d.peaks.size());
    if (d.peaks.empty()) return f;
    double mx = d.peaks.front().amplitude_uS, mn = mx, sum = 0.0, slope = 0.0, dur = 0.0;
    std::size_t n_dur = 0;
    for (const auto& p : d.peaks) {
        mx = std::max(mx, p.amplitude_uS);
        mn = std::min(mn, p.amplitude_uS);
        sum += p.amplitude_uS;
        slope += p.slope_uS_per_s;
        if (p.duration_s) {
            dur += *p.duration_s;
            ++n_dur;
        }
    }
    const auto n = static_cast<double>(d.peaks.size());
    f.peak_max = mx;
    f.peak_min = mn;
    f.peak_mean = sum / n;
    f.peak_mean_slope = slope / n;
    if (n_dur > 0) f.peak_mean_duration = dur / static_cast<double>(n_dur);
    return f;
}

} // namespace mwpipe::features
