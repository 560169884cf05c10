#pragma once

#include "mwpipe/error.hpp"
#include "mwpipe/time.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mwpipe::features {

enum class Modality { Ecg, Ppg, Resp, Eda, St, Gaze };

inline constexpr std::array kAllModalities = {Modality::Ecg, Modality::Ppg, Modality::Resp,
                                              Modality::Eda, Modality::St,  Modality::Gaze};

constexpr std::string_view to_string(Modality m) noexcept {
    switch (m) {
    case Modality::Ecg: return "ecg";
    case Modality::Ppg: return "ppg";
    case Modality::Resp: return "resp";
    case Modality::Eda: return "eda";
    case Modality::St: return "st";
    case Modality::Gaze: return "gaze";
    }
    return "?";
}

inline std::optional<Modality> parse_modality(std::string_view s) noexcept {
    for (const auto m : kAllModalities)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

[[nodiscard]] inline std::string raw_topic(Modality m) { return "bio." + std::string(to_string(m)); }
[[nodiscard]] inline std::string feature_topic(Modality m) { return "feat." + std::string(to_string(m)); }

inline constexpr std::string_view kEcgCatalog[] = {
    "rr_mean", "rr_std", "rr_min", "rr_max", "rmssd", "sdsd", "pnn10", "pnn25", "pnn50",
    "hrv_tri_index", "sd1", "sd2", "sd1_sd2", "sdell", "vlf_power", "lf_power", "hf_power", "total_power",
};
inline constexpr std::string_view kPpgCatalog[] = {"digital_pa", "reflection_index", "r2r", "auc", "svri", "ipa", "prv"};
inline constexpr std::string_view kRespCatalog[] = {"rate_bpm", "lf_power", "hf_power", "power_ratio"};
inline constexpr std::string_view kEdaCatalog[] = {
    "phasic_mean", "phasic_std", "phasic_range", "phasic_auc", "tonic_mean", "tonic_std", "tonic_range", "tonic_auc",
    "peak_max", "peak_min", "peak_mean", "peak_quantity", "peak_mean_duration", "peak_mean_slope",
};
inline constexpr std::string_view kStCatalog[] = {"mean", "median", "std", "max", "min"};
inline constexpr std::string_view kGazeCatalog[] = {
    "pupil_diameter", "saccade_freq", "mean_saccade_amplitude", "fixation_freq", "fixation_duration_ms", "pursuit_freq", "pso_freq",
};

[[nodiscard]] constexpr std::span<const std::string_view> catalog(Modality m) noexcept {
    switch (m) {
    case Modality::Ecg: return kEcgCatalog;
    case Modality::Ppg: return kPpgCatalog;
    case Modality::Resp: return kRespCatalog;
    case Modality::Eda: return kEdaCatalog;
    case Modality::St: return kStCatalog;
    case Modality::Gaze: return kGazeCatalog;
    }
    return {};
}

/// One window's features; values are positional against the modality catalog.
struct FeatureRow {
    Modality modality = Modality::Ecg;
    Timestamp t_end;
    double quality = 0.0;
    std::vector<std::optional<double>> values;

    FeatureRow() = default;
    FeatureRow(Modality m, Timestamp end) : modality(m), t_end(end), values(catalog(m).size()) {}

    [[nodiscard]] std::optional<double> get(std::string_view name) const {
        const auto cat = catalog(modality);
        for (std::size_t i = 0; i < cat.size(); ++i)
            if (cat[i] == name) return values[i];
        throw Error(ErrorCode::InvalidArgument, "no feature '" + std::string(name) + "' for " + std::string(to_string(modality)));
    }

    void set(std::string_view name, std::optional<double> v) {
        const auto cat = catalog(modality);
        for (std::size_t i = 0; i < cat.size(); ++i)
            if (cat[i] == name) {
                values[i] = v;
                return;
            }
        throw Error(ErrorCode::InvalidArgument, "no feature '" + std::string(name) + "' for " + std::string(to_string(modality)));
    }

    void clear_values() {
        for (auto& v : values) v.reset();
    }

    bool operator==(const FeatureRow&) const = default;
};

struct ScalarSample {
    Timestamp t;
    double v = 0.0;
};

struct GazeSample {
    Timestamp t;
    double x = 0.0, y = 0.0, d = 0.0;
};

template <class S>
struct Window {
    Timestamp t_start;
    Timestamp t_end;
    std::vector<S> samples;

    [[nodiscard]] double length_s() const noexcept { return static_cast<double>(t_end.nanos - t_start.nanos) / 1e9; }
};

/// Streaming windower. Window k ends at t0 + len + k*stride, where t0 is the first
/// sample time, and holds the samples with t in [end - len, end). A window is emitted
/// once a sample at or beyond its end arrives, or at finish() when the stream's
/// coverage reaches its end.
template <class S>
class Windower {
public:
    Windower(std::uint64_t len_ns, std::uint64_t stride_ns) : len_(len_ns), stride_(stride_ns) {
        if (len_ns == 0 || stride_ns == 0) throw Error(ErrorCode::InvalidArgument, "window length and stride must be > 0");
    }

    /// Samples must arrive in strictly increasing time.
    std::vector<Window<S>> push(const S& s) {
        std::vector<Window<S>> out;
        if (!next_end_) next_end_ = s.t.nanos + len_;
        while (s.t.nanos >= *next_end_) emit_next(out);
        buf_.push_back(s);
        return out;
    }

    /// Emits every remaining window whose end is covered by the data.
    std::vector<Window<S>> finish(Timestamp covered_end) {
        std::vector<Window<S>> out;
        if (!next_end_) return out;
        while (*next_end_ <= covered_end.nanos) emit_next(out);
        return out;
    }

    /// End time of the next window, once the first sample has arrived.
    [[nodiscard]] std::optional<Timestamp> next_end() const noexcept {
        if (!next_end_) return std::nullopt;
        return Timestamp{*next_end_};
    }

    [[nodiscard]] std::uint64_t length_ns() const noexcept { return len_; }
    [[nodiscard]] std::uint64_t stride_ns() const noexcept { return stride_; }

private:
    void emit_next(std::vector<Window<S>>& out) {
        const std::uint64_t end = *next_end_;
        const std::uint64_t start = end - len_;
        while (!buf_.empty() && buf_.front().t.nanos < start) buf_.pop_front();
        Window<S> w{Timestamp{start}, Timestamp{end}, {}};
        for (const auto& s : buf_) {
            if (s.t.nanos >= end) break;
            w.samples.push_back(s);
        }
        out.push_back(std::move(w));
        *next_end_ += stride_;
    }

    std::uint64_t len_;
    std::uint64_t stride_;
    std::optional<std::uint64_t> next_end_;
    std::deque<S> buf_;
};

/// Offline windowing of a complete stream; `covered_end` defaults to the last sample
/// time plus one nominal period.
template <class S>
[[nodiscard]] std::vector<Window<S>> make_windows(std::span<const S> stream, std::uint64_t len_ns, std::uint64_t stride_ns,
                                                  Timestamp covered_end) {
    Windower<S> w(len_ns, stride_ns);
    std::vector<Window<S>> out;
    for (const auto& s : stream)
        for (auto& win : w.push(s)) out.push_back(std::move(win));
    for (auto& win : w.finish(covered_end)) out.push_back(std::move(win));
    return out;
}

template <class S>
[[nodiscard]] std::vector<Window<S>> make_windows(std::span<const S> stream, Rate rate, double len_s = 30.0, double stride_s = 1.0) {
    if (stream.empty()) return {};
    const Timestamp covered{stream.back().t.nanos + (rate.periodic() ? rate.period_ceil_ns() : 1)};
    return make_windows(stream, seconds_to_ns(len_s), seconds_to_ns(stride_s), covered);
}

} // namespace mwpipe::features
