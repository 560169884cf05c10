#pragma once

// Seeded generators for the six raw biosignals with retained ground truth.
//
// Every generator fills the global sample grid of its stream over a span
// [start, end); all event times in a profile are relative to the span start.

#include "mwpipe/error.hpp"
#include "mwpipe/time.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mwpipe::synth {

inline const Rate kEcgRate = Rate::hz(252);
inline const Rate kPpgRate = Rate::hz(64);
inline const Rate kRespRate = Rate::hz(126, 125); // 1.008 Hz
inline const Rate kEdaRate = Rate::hz(4);
inline const Rate kStRate = Rate::hz(4);
inline const Rate kGazeRate = Rate::hz(120);

struct ScrEvent {
    double time_s = 0.0;
    double amplitude_uS = 0.0;
};

enum class GazeKind { Fixation, Saccade, Pursuit, Pso };

constexpr std::string_view to_string(GazeKind k) noexcept {
    switch (k) {
    case GazeKind::Fixation: return "fixation";
    case GazeKind::Saccade: return "saccade";
    case GazeKind::Pursuit: return "pursuit";
    case GazeKind::Pso: return "pso";
    }
    return "?";
}

inline GazeKind parse_gaze_kind(std::string_view s) {
    if (s == "fixation") return GazeKind::Fixation;
    if (s == "saccade") return GazeKind::Saccade;
    if (s == "pursuit") return GazeKind::Pursuit;
    if (s == "pso") return GazeKind::Pso;
    throw Error(ErrorCode::InvalidProfile, "unknown gaze event kind '" + std::string(s) + "'");
}

/// Saccades use amplitude_deg along direction_deg; pursuits move at velocity_deg_s along
/// direction_deg; a PSO oscillates with amplitude_deg along the preceding saccade's direction.
/// A fixation may carry a target position; otherwise it holds the current position.
struct GazeEvent {
    GazeKind kind = GazeKind::Fixation;
    double start_s = 0.0;
    double duration_s = 0.0;
    double amplitude_deg = 0.0;
    double velocity_deg_s = 0.0;
    double direction_deg = 0.0;
    bool has_target = false;
    double target_x_deg = 0.0;
    double target_y_deg = 0.0;
};

struct SynthProfile {
    std::uint64_t seed = 1;
    double duration_s = 60.0;

    double rr_mean_ms = 800.0;
    double rr_sdnn_ms = 0.0;
    double hf_mod_hz = 0.25;
    double hf_mod_depth_ms = 0.0;
    double ecg_noise = 0.0;
    double ppg_amp = 50.0;
    double ppg_dicrotic_ratio = 0.35;
    double ppg_noise = 0.0;

    double resp_rate_bpm = 15.0;
    double resp_fs_hz = 1.008;

    std::vector<ScrEvent> scr_events;
    double scr_rate_per_min = 0.0; // used only when scr_events is empty
    double eda_tonic_uS = 0.55;
    double eda_drift_uS_per_min = 0.0;
    double eda_noise_uS = 0.0;

    double st_base_c = 31.0;
    double st_drift_c_per_min = 0.0;
    double st_noise_c = 0.0;

    std::vector<GazeEvent> gaze_script; // auto-generated when empty
    double gaze_noise_deg = 0.0;
    double pupil_base_mm = 4.5;
    double pupil_mod_mm = 0.0;
};

inline void validate(const SynthProfile& p) {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidProfile, what); };
    if (!(p.duration_s > 0.0) || !std::isfinite(p.duration_s)) bad("duration_s must be > 0");
    if (!(p.rr_mean_ms > 0.0)) bad("rr_mean_ms must be > 0");
    if (p.rr_sdnn_ms < 0.0 || p.hf_mod_depth_ms < 0.0 || p.hf_mod_hz < 0.0) bad("rr variability parameters must be >= 0");
    if (!(p.eda_tonic_uS > 0.0)) bad("eda_tonic_uS must be > 0");
    if (p.pupil_base_mm < 3.0 || p.pupil_base_mm > 6.0) bad("pupil_base_mm must lie in [3, 6]");
    if (p.ecg_noise < 0.0 || p.ppg_noise < 0.0 || p.eda_noise_uS < 0.0 || p.st_noise_c < 0.0 || p.gaze_noise_deg < 0.0)
        bad("noise levels must be >= 0");
    if (!(p.ppg_amp > 0.0) || p.ppg_dicrotic_ratio < 0.0) bad("ppg shape parameters out of range");
    if (p.scr_rate_per_min < 0.0 || p.pupil_mod_mm < 0.0) bad("rates and modulation depths must be >= 0");
}

/// Seed derivation so each stream of each phase gets an independent generator.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum StreamSalt : std::uint64_t { kSaltRr = 1, kSaltEcg, kSaltPpg, kSaltResp, kSaltEda, kSaltSt, kSaltGaze, kSaltScr, kSaltScript };

/// Uniformly sampled stream on the global grid: sample i sits at rate.grid_time(first_index + i).
struct Waveform {
    Rate rate;
    std::uint64_t first_index = 0;
    std::vector<double> values;

    [[nodiscard]] Timestamp time(std::size_t i) const noexcept { return rate.grid_time(first_index + i); }
    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
};

struct GazeTrace {
    Rate rate = kGazeRate;
    std::uint64_t first_index = 0;
    std::vector<double> x, y, d;

    [[nodiscard]] Timestamp time(std::size_t i) const noexcept { return rate.grid_time(first_index + i); }
    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
};

/// Grid indices covering [start, end).
struct GridSpan {
    std::uint64_t first = 0;
    std::uint64_t count = 0;
};

[[nodiscard]] inline GridSpan grid_span(Rate rate, Timestamp start, Timestamp end) noexcept {
    const auto a = rate.first_index_at_or_after(start);
    const auto b = rate.first_index_at_or_after(end);
    return {a, b > a ? b - a : 0};
}

// ---------------------------------------------------------------------------
// Cardiac

struct RRSeries {
    std::vector<double> intervals_ms;
    Timestamp t0; // first beat

    /// Beat times in seconds since the epoch: t0, then the running sum of intervals.
    [[nodiscard]] std::vector<double> beat_times_s() const {
        std::vector<double> out;
        out.reserve(intervals_ms.size() + 1);
        double t = t0.seconds();
        out.push_back(t);
        for (const double rr : intervals_ms) {
            t += rr / 1000.0;
            out.push_back(t);
        }
        return out;
    }
};

inline constexpr double kMinRrMs = 200.0;
inline constexpr double kMaxRrMs = 3000.0;

/// RR intervals starting half a mean interval after `start`, spanning at least duration_s.
[[nodiscard]] inline RRSeries gen_rr_series(const SynthProfile& p, Timestamp start = {}) {
    if (!(p.rr_mean_ms > 0.0) || !(p.duration_s > 0.0)) throw Error(ErrorCode::InvalidProfile, "rr_mean_ms and duration_s must be > 0");
    std::mt19937_64 rng(mix_seed(p.seed, kSaltRr));
    std::normal_distribution<double> noise(0.0, 1.0);
    RRSeries rr;
    const double first = p.rr_mean_ms / 2000.0;
    rr.t0 = Timestamp::from_seconds(start.seconds() + first);
    double beat = first; // relative to span start
    while (beat < p.duration_s) {
        double v = p.rr_mean_ms + p.hf_mod_depth_ms * std::sin(2.0 * std::numbers::pi * p.hf_mod_hz * beat);
        if (p.rr_sdnn_ms > 0.0) v += p.rr_sdnn_ms * noise(rng);
        v = std::clamp(v, kMinRrMs + 1.0, kMaxRrMs - 1.0);
        rr.intervals_ms.push_back(v);
        beat += v / 1000.0;
    }
    return rr;
}

enum class CardiacModality { Ecg, Ppg };

namespace detail {

struct Bump {
    double offset_s, amplitude, sigma_s;
};

// P, Q, R, S, T
inline constexpr Bump kEcgTemplate[] = {
    {-0.200, 0.15, 0.025}, {-0.025, -0.15, 0.010}, {0.000, 1.20, 0.012}, {0.025, -0.25, 0.010}, {0.300, 0.30, 0.050},
};

inline constexpr double kPpgRiseS = 0.1;
inline constexpr double kPpgNotchFraction = 0.42;
inline constexpr double kPpgDicroticSigmaS = 0.05;

template <class F>
void add_over(std::vector<double>& out, Rate rate, std::uint64_t first_index, double from_s, double to_s, F&& f) {
    if (out.empty()) return;
    const auto lo = rate.first_index_at_or_after(Timestamp::from_seconds(std::max(0.0, from_s)));
    const auto hi = rate.first_index_at_or_after(Timestamp::from_seconds(std::max(0.0, to_s)));
    const auto begin = std::max(lo, first_index);
    const auto end = std::min(hi, first_index + out.size());
    for (auto k = begin; k < end; ++k) out[k - first_index] += f(rate.grid_time(k).seconds());
}

} // namespace detail

/// Renders beats onto the modality's sample grid over [start, end). The ECG stays
/// within [-0.5, 1.5]; the PPG pulse is an alpha-function systole with a Gaussian
/// dicrotic wave, shifted so its baseline sits at -amp/2.
[[nodiscard]] inline Waveform render_cardiac(const RRSeries& rr, CardiacModality m, Timestamp start, Timestamp end,
                                             const SynthProfile& p) {
    if (rr.intervals_ms.empty()) throw Error(ErrorCode::EmptySeries, "RR series is empty");
    const Rate rate = m == CardiacModality::Ecg ? kEcgRate : kPpgRate;
    const auto span = grid_span(rate, start, end);
    Waveform w{rate, span.first, std::vector<double>(span.count, 0.0)};
    const auto beats = rr.beat_times_s();

    if (m == CardiacModality::Ecg) {
        for (const double b : beats)
            detail::add_over(w.values, rate, w.first_index, b - 0.35, b + 0.55, [b](double t) {
                double v = 0.0;
                for (const auto& bump : detail::kEcgTemplate) {
                    const double z = (t - b - bump.offset_s) / bump.sigma_s;
                    v += bump.amplitude * std::exp(-0.5 * z * z);
                }
                return v;
            });
        if (p.ecg_noise > 0.0) {
            std::mt19937_64 rng(mix_seed(p.seed, kSaltEcg));
            std::normal_distribution<double> n(0.0, p.ecg_noise);
            for (double& v : w.values) v += n(rng);
        }
        for (double& v : w.values) v = std::clamp(v, -0.5, 1.5);
        return w;
    }

    const double amp = p.ppg_amp;
    for (double& v : w.values) v = -amp / 2.0;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        const double b = beats[i];
        const double interval_s = (i < rr.intervals_ms.size() ? rr.intervals_ms[i] : rr.intervals_ms.back()) / 1000.0;
        const double notch_at = detail::kPpgNotchFraction * interval_s;
        const double ratio = p.ppg_dicrotic_ratio;
        detail::add_over(w.values, rate, w.first_index, b, b + 1.5, [=](double t) {
            const double tau = t - b;
            double v = amp * (tau / detail::kPpgRiseS) * std::exp(1.0 - tau / detail::kPpgRiseS);
            if (ratio > 0.0) {
                const double z = (tau - notch_at) / detail::kPpgDicroticSigmaS;
                v += ratio * amp * std::exp(-0.5 * z * z);
            }
            return v;
        });
    }
    if (p.ppg_noise > 0.0) {
        std::mt19937_64 rng(mix_seed(p.seed, kSaltPpg));
        std::normal_distribution<double> n(0.0, p.ppg_noise);
        for (double& v : w.values) v += n(rng);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Respiration

inline constexpr double kRespAmplitude = 10.0;

[[nodiscard]] inline Rate resp_rate_for(double fs_hz) {
    if (!(fs_hz > 0.0)) throw Error(ErrorCode::InvalidRate, "respiration fs must be > 0");
    // Keep the exact rational for the default rate.
    if (std::abs(fs_hz - 1.008) < 1e-12) return kRespRate;
    return Rate::from_double(fs_hz);
}

/// ±10 sinusoid at rate_bpm / 60 Hz, phase zero at `start`.
[[nodiscard]] inline Waveform gen_resp(double rate_bpm, double fs_hz, Timestamp start, Timestamp end) {
    if (!(rate_bpm > 4.0 && rate_bpm < 60.0)) throw Error(ErrorCode::InvalidRate, "breath rate must lie in (4, 60) bpm");
    const Rate rate = resp_rate_for(fs_hz);
    const auto span = grid_span(rate, start, end);
    Waveform w{rate, span.first, std::vector<double>(span.count)};
    const double f = rate_bpm / 60.0;
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        const double t = w.time(i).seconds() - start.seconds();
        w.values[i] = kRespAmplitude * std::sin(2.0 * std::numbers::pi * f * t);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Electrodermal activity

inline constexpr double kScrRiseS = 0.75;
inline constexpr double kScrDecayS = 2.0;
inline constexpr double kMinScrSpacingS = 1.0;

/// Biexponential SCR shape normalized to a unit peak; zero before onset.
[[nodiscard]] inline double scr_shape(double tau) noexcept {
    if (tau <= 0.0) return 0.0;
    static const double peak_t = std::log(kScrDecayS / kScrRiseS) * kScrRiseS * kScrDecayS / (kScrDecayS - kScrRiseS);
    static const double norm = std::exp(-peak_t / kScrDecayS) - std::exp(-peak_t / kScrRiseS);
    return (std::exp(-tau / kScrDecayS) - std::exp(-tau / kScrRiseS)) / norm;
}

/// Time from SCR onset to its maximum.
[[nodiscard]] inline double scr_peak_delay_s() noexcept {
    return std::log(kScrDecayS / kScrRiseS) * kScrRiseS * kScrDecayS / (kScrDecayS - kScrRiseS);
}

/// The profile's SCR list, or a seeded random list when it is empty and a rate is set.
[[nodiscard]] inline std::vector<ScrEvent> scr_schedule(const SynthProfile& p) {
    if (!p.scr_events.empty() || p.scr_rate_per_min <= 0.0) return p.scr_events;
    std::mt19937_64 rng(mix_seed(p.seed, kSaltScr));
    std::exponential_distribution<double> gap(p.scr_rate_per_min / 60.0);
    std::uniform_real_distribution<double> amp(0.02, 0.08);
    std::vector<ScrEvent> out;
    double t = 0.0;
    while (true) {
        t += std::max(2.0 * kMinScrSpacingS, gap(rng));
        if (t >= p.duration_s) break;
        out.push_back({t, amp(rng)});
    }
    return out;
}

inline void check_scr_events(std::span<const ScrEvent> events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!(events[i].amplitude_uS > 0.0)) throw Error(ErrorCode::InvalidProfile, "SCR amplitudes must be > 0");
        if (i > 0) {
            if (events[i].time_s < events[i - 1].time_s) throw Error(ErrorCode::InvalidProfile, "SCR events must be time-ordered");
            if (events[i].time_s - events[i - 1].time_s < kMinScrSpacingS)
                throw Error(ErrorCode::OverlapTooDense, "SCR events closer than 1 s");
        }
    }
}

[[nodiscard]] inline Waveform gen_eda(const SynthProfile& p, Timestamp start, Timestamp end) {
    const auto events = scr_schedule(p);
    check_scr_events(events);
    const auto span = grid_span(kEdaRate, start, end);
    Waveform w{kEdaRate, span.first, std::vector<double>(span.count)};
    std::mt19937_64 rng(mix_seed(p.seed, kSaltEda));
    std::normal_distribution<double> n(0.0, p.eda_noise_uS > 0.0 ? p.eda_noise_uS : 1.0);
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        const double t = w.time(i).seconds() - start.seconds();
        double v = p.eda_tonic_uS + p.eda_drift_uS_per_min * t / 60.0;
        for (const auto& e : events) v += e.amplitude_uS * scr_shape(t - e.time_s);
        if (p.eda_noise_uS > 0.0) v += n(rng);
        w.values[i] = v;
    }
    return w;
}

// ---------------------------------------------------------------------------
// Skin temperature

[[nodiscard]] inline Waveform gen_drift_st(const SynthProfile& p, Timestamp start, Timestamp end) {
    if (!(p.st_base_c >= 25.0 && p.st_base_c <= 40.0)) throw Error(ErrorCode::InvalidBase, "st_base_c must lie in [25, 40]");
    const auto span = grid_span(kStRate, start, end);
    Waveform w{kStRate, span.first, std::vector<double>(span.count)};
    std::mt19937_64 rng(mix_seed(p.seed, kSaltSt));
    std::normal_distribution<double> n(0.0, p.st_noise_c > 0.0 ? p.st_noise_c : 1.0);
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        const double t = w.time(i).seconds() - start.seconds();
        double v = p.st_base_c + p.st_drift_c_per_min * t / 60.0;
        if (p.st_noise_c > 0.0) v += n(rng);
        w.values[i] = v;
    }
    return w;
}

// ---------------------------------------------------------------------------
// Gaze

inline constexpr double kGazeLimitX = 60.0;
inline constexpr double kGazeLimitY = 45.0;
inline constexpr double kPupilModHz = 0.05;

namespace detail {

[[nodiscard]] inline double min_jerk(double s) noexcept {
    s = std::clamp(s, 0.0, 1.0);
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

/// One overshoot-and-return cycle under a sine envelope: starts and ends at rest.
[[nodiscard]] inline double pso_shape(double tau, double duration) noexcept {
    const double s = std::clamp(tau / duration, 0.0, 1.0);
    return std::sin(std::numbers::pi * s) * std::sin(2.0 * std::numbers::pi * s);
}

/// Smooth drift noise: eight sinusoids below 1 Hz whose sum has the requested RMS.
struct DriftNoise {
    double freq[8]{}, phase_x[8]{}, phase_y[8]{};
    double amp = 0.0;

    DriftNoise(std::uint64_t seed, double rms) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> f(0.1, 1.0);
        std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
        for (int k = 0; k < 8; ++k) {
            freq[k] = f(rng);
            phase_x[k] = ph(rng);
            phase_y[k] = ph(rng);
        }
        amp = rms * std::sqrt(2.0 / 8.0);
    }

    [[nodiscard]] std::pair<double, double> at(double t) const noexcept {
        if (amp == 0.0) return {0.0, 0.0};
        double x = 0.0, y = 0.0;
        for (int k = 0; k < 8; ++k) {
            x += std::sin(2.0 * std::numbers::pi * freq[k] * t + phase_x[k]);
            y += std::sin(2.0 * std::numbers::pi * freq[k] * t + phase_y[k]);
        }
        return {amp * x, amp * y};
    }
};

struct Segment {
    GazeEvent ev;
    double x0 = 0.0, y0 = 0.0; // position at event start
    double dx = 0.0, dy = 0.0; // unit direction
};

} // namespace detail

/// Position after the event, starting from (x, y).
[[nodiscard]] inline std::pair<double, double> gaze_event_end(const GazeEvent& e, double x, double y) noexcept {
    const double rad = e.direction_deg * std::numbers::pi / 180.0;
    switch (e.kind) {
    case GazeKind::Fixation:
        if (e.has_target) return {e.target_x_deg, e.target_y_deg};
        return {x, y};
    case GazeKind::Saccade: return {x + e.amplitude_deg * std::cos(rad), y + e.amplitude_deg * std::sin(rad)};
    case GazeKind::Pursuit:
        return {x + e.velocity_deg_s * e.duration_s * std::cos(rad), y + e.velocity_deg_s * e.duration_s * std::sin(rad)};
    case GazeKind::Pso: return {x, y};
    }
    return {x, y};
}

inline void check_gaze_script(std::span<const GazeEvent> script) {
    double x = 0.0, y = 0.0;
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto& e = script[i];
        if (!(e.duration_s > 0.0) || e.start_s < 0.0) throw Error(ErrorCode::InvalidProfile, "gaze events need start >= 0 and duration > 0");
        if (i > 0 && e.start_s < script[i - 1].start_s + script[i - 1].duration_s - 1e-9)
            throw Error(ErrorCode::OverlappingEvents, "gaze events overlap or are out of order");
        if (e.kind == GazeKind::Saccade && !(e.amplitude_deg > 0.0)) throw Error(ErrorCode::InvalidProfile, "saccade amplitude must be > 0");
        std::tie(x, y) = gaze_event_end(e, x, y);
        if (std::abs(x) > kGazeLimitX || std::abs(y) > kGazeLimitY)
            throw Error(ErrorCode::InvalidProfile, "gaze script leaves the +-60 x +-45 degree field");
    }
}

/// Random but plausible script: fixations separated by saccades, with occasional
/// PSOs and pursuits, drifting back toward the centre of the field.
[[nodiscard]] inline std::vector<GazeEvent> auto_gaze_script(std::uint64_t seed, double duration_s) {
    std::mt19937_64 rng(mix_seed(seed, kSaltScript));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<GazeEvent> out;
    double t = 0.0, x = 0.0, y = 0.0;
    while (true) {
        const double fix = 0.4 + 2.0 * u(rng);
        if (t + fix >= duration_s) break;
        out.push_back({GazeKind::Fixation, t, fix});
        t += fix;
        const double roll = u(rng);
        GazeEvent e;
        const double toward_centre = std::atan2(-y, -x) * 180.0 / std::numbers::pi;
        e.direction_deg = std::hypot(x, y) > 10.0 ? toward_centre + (u(rng) - 0.5) * 60.0 : u(rng) * 360.0;
        if (roll < 0.12) {
            e.kind = GazeKind::Pursuit;
            e.velocity_deg_s = 8.0 + 10.0 * u(rng);
            e.duration_s = 0.5 + u(rng);
        } else {
            e.kind = GazeKind::Saccade;
            e.amplitude_deg = 2.0 + 10.0 * u(rng);
            e.duration_s = 0.02 + 0.0025 * e.amplitude_deg;
        }
        e.start_s = t;
        if (t + e.duration_s + 0.2 >= duration_s) break;
        std::tie(x, y) = gaze_event_end(e, x, y);
        out.push_back(e);
        t += e.duration_s;
        if (e.kind == GazeKind::Saccade && u(rng) < 0.3) {
            GazeEvent pso{GazeKind::Pso, t, 0.06};
            pso.amplitude_deg = 0.3;
            pso.direction_deg = e.direction_deg;
            out.push_back(pso);
            t += pso.duration_s;
        }
    }
    return out;
}

/// Gaze position (deg) and pupil diameter (mm) at 120 Hz over [start, end).
[[nodiscard]] inline GazeTrace gen_gaze(const SynthProfile& p, Timestamp start, Timestamp end) {
    const auto script = p.gaze_script.empty() ? auto_gaze_script(p.seed, p.duration_s) : p.gaze_script;
    check_gaze_script(script);

    std::vector<detail::Segment> segs;
    segs.reserve(script.size());
    double x = 0.0, y = 0.0;
    for (const auto& e : script) {
        const double rad = e.direction_deg * std::numbers::pi / 180.0;
        segs.push_back({e, x, y, std::cos(rad), std::sin(rad)});
        std::tie(x, y) = gaze_event_end(e, x, y);
    }

    const auto span = grid_span(kGazeRate, start, end);
    GazeTrace g{kGazeRate, span.first, {}, {}, {}};
    g.x.resize(span.count);
    g.y.resize(span.count);
    g.d.resize(span.count);
    const detail::DriftNoise noise(mix_seed(p.seed, kSaltGaze), p.gaze_noise_deg);

    std::size_t cur = 0;
    double hold_x = 0.0, hold_y = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = g.time(i).seconds() - start.seconds();
        while (cur < segs.size() && t >= segs[cur].ev.start_s + segs[cur].ev.duration_s) {
            std::tie(hold_x, hold_y) = gaze_event_end(segs[cur].ev, segs[cur].x0, segs[cur].y0);
            ++cur;
        }
        double px = hold_x, py = hold_y;
        if (cur < segs.size() && t >= segs[cur].ev.start_s) {
            const auto& s = segs[cur];
            const double tau = t - s.ev.start_s;
            switch (s.ev.kind) {
            case GazeKind::Fixation:
                std::tie(px, py) = gaze_event_end(s.ev, s.x0, s.y0);
                break;
            case GazeKind::Saccade: {
                const double f = detail::min_jerk(tau / s.ev.duration_s) * s.ev.amplitude_deg;
                px = s.x0 + f * s.dx;
                py = s.y0 + f * s.dy;
                break;
            }
            case GazeKind::Pursuit:
                px = s.x0 + s.ev.velocity_deg_s * tau * s.dx;
                py = s.y0 + s.ev.velocity_deg_s * tau * s.dy;
                break;
            case GazeKind::Pso: {
                const double f = s.ev.amplitude_deg * detail::pso_shape(tau, s.ev.duration_s);
                px = s.x0 + f * s.dx;
                py = s.y0 + f * s.dy;
                break;
            }
            }
        }
        const auto [nx, ny] = noise.at(t);
        g.x[i] = px + nx;
        g.y[i] = py + ny;
        g.d[i] = p.pupil_base_mm + p.pupil_mod_mm * std::sin(2.0 * std::numbers::pi * kPupilModHz * t);
    }
    return g;
}

} // namespace mwpipe::synth
