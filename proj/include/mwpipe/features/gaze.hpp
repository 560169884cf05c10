#pragma once

// Velocity/dispersion-threshold eye-movement classification.

#include "mwpipe/error.hpp"
#include "mwpipe/features/window.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace mwpipe::features {

struct GazeConfig {
    double saccade_speed_deg_s = 30.0;
    std::size_t saccade_min_samples = 2;
    double pso_window_s = 0.04;
    double pso_max_s = 0.08;
    double pso_speed_deg_s = 5.0;
    double pursuit_min_speed_deg_s = 5.0;
    double pursuit_max_speed_deg_s = 30.0;
    double pursuit_max_turn_deg = 45.0;
    double pursuit_min_s = 0.1;
    double fixation_dispersion_deg = 1.0;
    double fixation_min_s = 0.1;
    double bridge_max_s = 0.1;
    double max_invalid_fraction = 0.3;
};

enum class GazeEventKind { Fixation, Saccade, Pursuit, Pso };

struct GazeEventRecord {
    GazeEventKind kind = GazeEventKind::Fixation;
    double start_t = 0.0;
    double end_t = 0.0;
    std::optional<double> amplitude_deg;
};

using GazeEventList = std::vector<GazeEventRecord>;

namespace detail {

struct GazeSegment {
    std::vector<double> t, x, y;
};

/// Bridges invalid runs up to bridge_max_s by linear interpolation and splits the
/// stream at longer runs. Leading and trailing invalid runs are dropped.
[[nodiscard]] inline std::vector<GazeSegment> valid_segments(std::span<const GazeSample> s, const GazeConfig& cfg) {
    std::vector<GazeSegment> out;
    GazeSegment cur;
    std::size_t i = 0;
    const auto n = s.size();
    auto valid = [&](std::size_t k) { return s[k].d > 0.0; };
    while (i < n) {
        if (valid(i)) {
            cur.t.push_back(s[i].t.seconds());
            cur.x.push_back(s[i].x);
            cur.y.push_back(s[i].y);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !valid(j)) ++j;
        const bool interior = i > 0 && j < n;
        if (interior && s[j].t.seconds() - s[i - 1].t.seconds() <= cfg.bridge_max_s + 1e-9) {
            const auto& a = s[i - 1];
            const auto& b = s[j];
            const double span = b.t.seconds() - a.t.seconds();
            for (std::size_t k = i; k < j; ++k) {
                const double f = (s[k].t.seconds() - a.t.seconds()) / span;
                cur.t.push_back(s[k].t.seconds());
                cur.x.push_back(a.x + f * (b.x - a.x));
                cur.y.push_back(a.y + f * (b.y - a.y));
            }
        } else if (!cur.t.empty()) {
            out.push_back(std::move(cur));
            cur = {};
        }
        i = j;
    }
    if (!cur.t.empty()) out.push_back(std::move(cur));
    return out;
}

enum class Label { None, Saccade, Pso, Pursuit };

inline void classify_segment(const GazeSegment& g, double fs, const GazeConfig& cfg, GazeEventList& out) {
    const auto n = g.t.size();
    if (n < 3) return;
    const double dt = 1.0 / fs;

    std::vector<double> vx(n), vy(n), raw(n), speed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 < n ? i + 1 : n - 1;
        const double span = g.t[b] - g.t[a];
        vx[i] = (g.x[b] - g.x[a]) / span;
        vy[i] = (g.y[b] - g.y[a]) / span;
        raw[i] = std::hypot(vx[i], vy[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 < n ? i + 1 : n - 1;
        double sum = 0.0;
        for (std::size_t k = a; k <= b; ++k) sum += raw[k];
        speed[i] = sum / static_cast<double>(b - a + 1);
    }

    std::vector<Label> label(n, Label::None);
    std::vector<GazeEventRecord> found;

    // Saccades and their post-saccadic oscillations.
    for (std::size_t i = 0; i < n;) {
        if (speed[i] <= cfg.saccade_speed_deg_s) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && speed[j] > cfg.saccade_speed_deg_s) ++j;
        if (j - i < cfg.saccade_min_samples) {
            i = j;
            continue;
        }
        const std::size_t on = i, off = j - 1;
        for (std::size_t k = on; k <= off; ++k) label[k] = Label::Saccade;
        const double amp = std::hypot(g.x[off] - g.x[on], g.y[off] - g.y[on]);
        found.push_back({GazeEventKind::Saccade, g.t[on], g.t[off] + dt, amp});

        // Speed falls to a local minimum, then rises again within the PSO window.
        std::size_t k = off + 1;
        while (k + 1 < n && speed[k + 1] < speed[k]) ++k;
        if (k + 1 < n && g.t[k] - g.t[off] <= cfg.pso_window_s) {
            std::size_t e = k + 1;
            bool rose = false;
            while (e < n && speed[e] > cfg.pso_speed_deg_s && speed[e] <= cfg.saccade_speed_deg_s) {
                rose = true;
                ++e;
            }
            // Rising again then falling back below the PSO speed completes the oscillation.
            while (!rose && e < n && speed[e] > speed[e - 1] && speed[e] <= cfg.pso_speed_deg_s) ++e;
            if (rose && e < n && speed[e] <= cfg.pso_speed_deg_s && g.t[e] - g.t[off + 1] <= cfg.pso_max_s) {
                for (std::size_t m = off + 1; m < e; ++m) label[m] = Label::Pso;
                found.push_back({GazeEventKind::Pso, g.t[off + 1], g.t[e], std::nullopt});
                j = e;
            }
        }
        i = j;
    }

    // Smooth pursuit over unlabeled samples.
    const double max_turn = cfg.pursuit_max_turn_deg * std::numbers::pi / 180.0;
    for (std::size_t i = 0; i < n;) {
        auto in_band = [&](std::size_t k) {
            return label[k] == Label::None && speed[k] >= cfg.pursuit_min_speed_deg_s && speed[k] <= cfg.pursuit_max_speed_deg_s;
        };
        if (!in_band(i)) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < n && in_band(j)) {
            const double turn = std::abs(std::remainder(std::atan2(vy[j], vx[j]) - std::atan2(vy[j - 1], vx[j - 1]), 2.0 * std::numbers::pi));
            if (turn >= max_turn) break;
            ++j;
        }
        if (g.t[j - 1] + dt - g.t[i] >= cfg.pursuit_min_s - 1e-9) {
            for (std::size_t k = i; k < j; ++k) label[k] = Label::Pursuit;
            found.push_back({GazeEventKind::Pursuit, g.t[i], g.t[j - 1] + dt, std::nullopt});
        }
        i = j;
    }

    // Dispersion-threshold fixations over what remains.
    for (std::size_t i = 0; i < n;) {
        if (label[i] != Label::None) {
            ++i;
            continue;
        }
        double xmin = g.x[i], xmax = g.x[i], ymin = g.y[i], ymax = g.y[i];
        std::size_t j = i + 1;
        while (j < n && label[j] == Label::None) {
            const double nxmin = std::min(xmin, g.x[j]), nxmax = std::max(xmax, g.x[j]);
            const double nymin = std::min(ymin, g.y[j]), nymax = std::max(ymax, g.y[j]);
            if (std::max(nxmax - nxmin, nymax - nymin) >= cfg.fixation_dispersion_deg) break;
            xmin = nxmin, xmax = nxmax, ymin = nymin, ymax = nymax;
            ++j;
        }
        if (g.t[j - 1] + dt - g.t[i] >= cfg.fixation_min_s - 1e-9) {
            found.push_back({GazeEventKind::Fixation, g.t[i], g.t[j - 1] + dt, std::nullopt});
            i = j;
        } else {
            ++i;
        }
    }

    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.start_t < b.start_t; });
    out.insert(out.end(), found.begin(), found.end());
}

} // namespace detail

/// Throws TooManyInvalidSamples when more than max_invalid_fraction of the samples
/// have a non-positive pupil diameter.
[[nodiscard]] inline GazeEventList classify_gaze(std::span<const GazeSample> s, double fs, const GazeConfig& cfg = {}) {
    GazeEventList out;
    if (s.empty()) return out;
    const auto invalid = std::count_if(s.begin(), s.end(), [](const GazeSample& g) { return !(g.d > 0.0); });
    if (static_cast<double>(invalid) > cfg.max_invalid_fraction * static_cast<double>(s.size()))
        throw Error(ErrorCode::TooManyInvalidSamples, "more than 30% of gaze samples are invalid");
    for (const auto& seg : detail::valid_segments(s, cfg)) detail::classify_segment(seg, fs, cfg, out);
    return out;
}

struct GazeFeatures {
    std::optional<double> pupil_diameter;
    double saccade_freq = 0.0, fixation_freq = 0.0, pursuit_freq = 0.0, pso_freq = 0.0;
    std::optional<double> mean_saccade_amplitude, fixation_duration_ms;
};

[[nodiscard]] inline GazeFeatures gaze_features(const GazeEventList& events, std::span<const GazeSample> s, double window_s) {
    GazeFeatures f;
    double dsum = 0.0;
    std::size_t dn = 0;
    for (const auto& g : s)
        if (g.d > 0.0) {
            dsum += g.d;
            ++dn;
        }
    if (dn > 0) f.pupil_diameter = dsum / static_cast<double>(dn);

    std::size_t sac = 0, fix = 0, pur = 0, pso = 0;
    double amp = 0.0, dur = 0.0;
    for (const auto& e : events) {
        switch (e.kind) {
        case GazeEventKind::Saccade:
            ++sac;
            amp += e.amplitude_deg.value_or(0.0);
            break;
        case GazeEventKind::Fixation:
            ++fix;
            dur += (e.end_t - e.start_t) * 1000.0;
            break;
        case GazeEventKind::Pursuit: ++pur; break;
        case GazeEventKind::Pso: ++pso; break;
        }
    }
    f.saccade_freq = static_cast<double>(sac) / window_s;
    f.fixation_freq = static_cast<double>(fix) / window_s;
    f.pursuit_freq = static_cast<double>(pur) / window_s;
    f.pso_freq = static_cast<double>(pso) / window_s;
    if (sac > 0) f.mean_saccade_amplitude = amp / static_cast<double>(sac);
    if (fix > 0) f.fixation_duration_ms = dur / static_cast<double>(fix);
    return f;
}

} // namespace mwpipe::features
