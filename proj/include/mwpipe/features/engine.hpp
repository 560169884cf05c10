#pragma once

// Streaming feature extraction: raw samples in, one FeatureRow per window per
// modality out. FeatureProcessor is bus-independent so the live engine and offline
// extraction share one code path.

#include "mwpipe/bus.hpp"
#include "mwpipe/features/beats.hpp"
#include "mwpipe/features/eda.hpp"
#include "mwpipe/features/gaze.hpp"
#include "mwpipe/features/hrv.hpp"
#include "mwpipe/features/ppg.hpp"
#include "mwpipe/features/resp.hpp"
#include "mwpipe/features/st.hpp"
#include "mwpipe/features/window.hpp"
#include "mwpipe/topics.hpp"

#include <array>
#include <map>
#include <optional>
#include <variant>

namespace mwpipe::features {

struct FeatureConfig {
    double window_s = 30.0;
    double stride_s = 1.0;
    double min_quality = 0.7;
    BeatConfig beats;
    EdaConfig eda;
    GazeConfig gaze;
};

/// valid / max(n, floor(len * fs)) so that missing samples count as invalid.
[[nodiscard]] inline double window_quality(std::size_t valid, std::size_t n, std::uint64_t len_ns, Rate rate) {
    std::uint64_t expected = n;
    if (rate.periodic()) {
        const auto e = static_cast<std::uint64_t>((static_cast<mwpipe::detail::u128>(len_ns) * rate.num) /
                                                  (static_cast<mwpipe::detail::u128>(rate.den) * kNanosPerSecond));
        expected = std::max<std::uint64_t>(expected, e);
    }
    if (expected == 0) return 0.0;
    return static_cast<double>(valid) / static_cast<double>(expected);
}

namespace detail {

inline void fill_ecg(FeatureRow& row, std::span<const double> x, std::span<const double> t, double fs, const FeatureConfig& cfg) {
    const auto b = detect_ecg_beats(x, t, fs, cfg.beats);
    const auto s = hrv_stat_features(b.intervals_ms);
    row.set("rr_mean", s.rr_mean);
    row.set("rr_std", s.rr_std);
    row.set("rr_min", s.rr_min);
    row.set("rr_max", s.rr_max);
    row.set("rmssd", s.rmssd);
    row.set("sdsd", s.sdsd);
    row.set("pnn10", s.pnn10);
    row.set("pnn25", s.pnn25);
    row.set("pnn50", s.pnn50);
    row.set("hrv_tri_index", s.tri_index);
    row.set("sd1", s.sd1);
    row.set("sd2", s.sd2);
    row.set("sd1_sd2", s.sd1_sd2);
    row.set("sdell", s.sdell);
    if (const auto bands = hrv_frequency(b.interval_times_s, b.intervals_ms)) {
        row.set("vlf_power", bands->vlf);
        row.set("lf_power", bands->lf);
        row.set("hf_power", bands->hf);
        row.set("total_power", bands->total);
    }
}

inline void fill_ppg(FeatureRow& row, std::span<const double> x, std::span<const double> t, double fs, const FeatureConfig& cfg,
                     std::optional<double> baseline_pa) {
    const auto b = detect_ppg_beats(x, t, fs, cfg.beats);
    const auto f = ppg_features(x, t, b, baseline_pa);
    row.set("digital_pa", f.digital_pa);
    row.set("reflection_index", f.reflection_index);
    row.set("r2r", f.r2r);
    row.set("auc", f.auc);
    row.set("svri", f.svri);
    row.set("ipa", f.ipa);
    row.set("prv", f.prv);
}

inline void fill_eda(FeatureRow& row, std::span<const double> x, std::span<const double> t, double fs, const FeatureConfig& cfg,
                     double t_start, double t_end) {
    const auto f = eda_features(eda_decompose(x, t, fs, cfg.eda), t_start, t_end);
    row.set("phasic_mean", f.phasic_mean);
    row.set("phasic_std", f.phasic_std);
    row.set("phasic_range", f.phasic_range);
    row.set("phasic_auc", f.phasic_auc);
    row.set("tonic_mean", f.tonic_mean);
    row.set("tonic_std", f.tonic_std);
    row.set("tonic_range", f.tonic_range);
    row.set("tonic_auc", f.tonic_auc);
    row.set("peak_max", f.peak_max);
    row.set("peak_min", f.peak_min);
    row.set("peak_mean", f.peak_mean);
    row.set("peak_quantity", f.peak_quantity);
    row.set("peak_mean_duration", f.peak_mean_duration);
    row.set("peak_mean_slope", f.peak_mean_slope);
}

} // namespace detail

/// Features of one scalar-modality window. `baseline_pa` only matters for PPG.
/// Rows below min_quality, or whose extractor rejects the window, carry only quality.
[[nodiscard]] inline FeatureRow compute_row(Modality m, const Window<ScalarSample>& w, Rate rate, const FeatureConfig& cfg,
                                            std::optional<double> baseline_pa = std::nullopt) {
    FeatureRow row(m, w.t_end);
    const std::uint64_t len_ns = w.t_end.nanos - w.t_start.nanos;
    row.quality = window_quality(w.samples.size(), w.samples.size(), len_ns, rate);
    if (row.quality < cfg.min_quality) return row;

    std::vector<double> x(w.samples.size()), t(w.samples.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = w.samples[i].v;
        t[i] = w.samples[i].t.seconds();
    }
    const double fs = rate.as_double();
    try {
        switch (m) {
        case Modality::Ecg: detail::fill_ecg(row, x, t, fs, cfg); break;
        case Modality::Ppg: detail::fill_ppg(row, x, t, fs, cfg, baseline_pa); break;
        case Modality::Resp: {
            const auto r = resp_features(x, fs, w.length_s());
            row.set("rate_bpm", r.rate_bpm);
            row.set("lf_power", r.lf_power);
            row.set("hf_power", r.hf_power);
            row.set("power_ratio", r.power_ratio);
            break;
        }
        case Modality::Eda: detail::fill_eda(row, x, t, fs, cfg, w.t_start.seconds(), w.t_end.seconds()); break;
        case Modality::St:
            if (const auto s = st_features(x)) {
                row.set("mean", s->mean);
                row.set("median", s->median);
                row.set("std", s->std);
                row.set("max", s->max);
                row.set("min", s->min);
            }
            break;
        case Modality::Gaze: throw Error(ErrorCode::InvalidArgument, "gaze windows carry gaze samples");
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) throw;
        row.clear_values();
    }
    return row;
}

[[nodiscard]] inline FeatureRow compute_row(const Window<GazeSample>& w, Rate rate, const FeatureConfig& cfg) {
    FeatureRow row(Modality::Gaze, w.t_end);
    const std::uint64_t len_ns = w.t_end.nanos - w.t_start.nanos;
    const auto valid = static_cast<std::size_t>(std::count_if(w.samples.begin(), w.samples.end(), [](const GazeSample& g) { return g.d > 0.0; }));
    row.quality = window_quality(valid, w.samples.size(), len_ns, rate);
    if (row.quality < cfg.min_quality) return row;
    try {
        const auto events = classify_gaze(w.samples, rate.as_double(), cfg.gaze);
        const auto f = gaze_features(events, w.samples, w.length_s());
        row.set("pupil_diameter", f.pupil_diameter);
        row.set("saccade_freq", f.saccade_freq);
        row.set("mean_saccade_amplitude", f.mean_saccade_amplitude);
        row.set("fixation_freq", f.fixation_freq);
        row.set("fixation_duration_ms", f.fixation_duration_ms);
        row.set("pursuit_freq", f.pursuit_freq);
        row.set("pso_freq", f.pso_freq);
    } catch (const Error&) {
        row.clear_values();
    }
    return row;
}

/// Routes raw samples ("bio.<modality>") into per-modality windowers and "sim.meta"
/// samples into the sVRI baseline tracker. Samples must arrive in global
/// (t, topic, seq) order for the baseline to be reproducible.
///
/// The sVRI baseline is the mean Digital PA over PPG windows lying entirely inside the
/// first baseline phase; it is fixed at the first window ending after that phase.
class FeatureProcessor {
public:
    explicit FeatureProcessor(FeatureConfig cfg = {}) : cfg_(std::move(cfg)) {
        len_ns_ = seconds_to_ns(cfg_.window_s);
        stride_ns_ = seconds_to_ns(cfg_.stride_s);
        if (len_ns_ == 0 || stride_ns_ == 0) throw Error(ErrorCode::InvalidArgument, "window length and stride must be > 0");
    }

    void add_stream(Modality m, Rate rate) {
        auto& ch = channels_[static_cast<std::size_t>(m)];
        if (ch) throw Error(ErrorCode::InvalidArgument, "modality registered twice");
        ch.emplace(Channel{rate, m == Modality::Gaze ? Windowers{Windower<GazeSample>(len_ns_, stride_ns_)}
                                                     : Windowers{Windower<ScalarSample>(len_ns_, stride_ns_)},
                           std::nullopt});
    }

    [[nodiscard]] bool has_stream(Modality m) const noexcept { return channels_[static_cast<std::size_t>(m)].has_value(); }

    /// Rows for every window completed by this sample; other topics are ignored.
    std::vector<FeatureRow> feed(const TimedSample& s) {
        std::vector<FeatureRow> out;
        if (s.topic == topics::kMeta) {
            on_meta(s);
            return out;
        }
        if (!s.topic.starts_with("bio.")) return out;
        const auto m = parse_modality(std::string_view(s.topic).substr(4));
        if (!m || !has_stream(*m)) return out;
        auto& ch = *channels_[static_cast<std::size_t>(*m)];
        ch.last_t = s.t;
        const auto& v = s.payload->values();
        if (*m == Modality::Gaze) {
            const GazeSample g{s.t, std::get<double>(v.at(0)), std::get<double>(v.at(1)), std::get<double>(v.at(2))};
            for (const auto& w : std::get<Windower<GazeSample>>(ch.windower).push(g)) out.push_back(compute_row(w, ch.rate, cfg_));
        } else {
            const ScalarSample x{s.t, std::get<double>(v.at(0))};
            for (const auto& w : std::get<Windower<ScalarSample>>(ch.windower).push(x)) out.push_back(scalar_row(*m, ch.rate, w));
        }
        return out;
    }

    /// Emits the windows covered by each stream's last sample plus one period.
    std::vector<FeatureRow> finish() {
        std::vector<FeatureRow> out;
        for (std::size_t i = 0; i < channels_.size(); ++i) {
            auto& ch = channels_[i];
            if (!ch || !ch->last_t) continue;
            const Timestamp covered{ch->last_t->nanos + (ch->rate.periodic() ? ch->rate.period_ceil_ns() : 1)};
            const auto m = static_cast<Modality>(i);
            if (m == Modality::Gaze) {
                for (const auto& w : std::get<Windower<GazeSample>>(ch->windower).finish(covered))
                    out.push_back(compute_row(w, ch->rate, cfg_));
            } else {
                for (const auto& w : std::get<Windower<ScalarSample>>(ch->windower).finish(covered))
                    out.push_back(scalar_row(m, ch->rate, w));
            }
        }
        return out;
    }

    /// No future row can be stamped earlier than this.
    [[nodiscard]] std::optional<Timestamp> next_emit_lower_bound() const {
        std::optional<Timestamp> best;
        for (const auto& ch : channels_) {
            if (!ch) continue;
            const auto e = std::visit([](const auto& w) { return w.next_end(); }, ch->windower);
            if (!e) continue;
            if (!best || *e < *best) best = e;
        }
        return best;
    }

    [[nodiscard]] std::optional<double> baseline_pa() const noexcept { return baseline_pa_; }
    [[nodiscard]] const FeatureConfig& config() const noexcept { return cfg_; }

private:
    using Windowers = std::variant<Windower<ScalarSample>, Windower<GazeSample>>;
    struct Channel {
        Rate rate;
        Windowers windower;
        std::optional<Timestamp> last_t;
    };

    void on_meta(const TimedSample& s) {
        const auto& phase = s.payload->text("phase");
        if (phase == "baseline") {
            in_baseline_ = true;
        } else {
            if (in_baseline_ && !baseline_end_) baseline_end_ = s.t;
            in_baseline_ = false;
        }
    }

    FeatureRow scalar_row(Modality m, Rate rate, const Window<ScalarSample>& w) {
        if (m != Modality::Ppg) return compute_row(m, w, rate, cfg_);
        if (!baseline_done_ && baseline_end_ && w.t_end > *baseline_end_) {
            baseline_done_ = true;
            if (baseline_n_ > 0) baseline_pa_ = baseline_sum_ / static_cast<double>(baseline_n_);
        }
        auto row = compute_row(m, w, rate, cfg_, baseline_pa_);
        const bool inside = baseline_end_ ? w.t_end <= *baseline_end_ : in_baseline_;
        if (!baseline_done_ && inside) {
            if (const auto pa = row.get("digital_pa")) {
                baseline_sum_ += *pa;
                ++baseline_n_;
            }
        }
        return row;
    }

    FeatureConfig cfg_;
    std::uint64_t len_ns_ = 0, stride_ns_ = 0;
    std::array<std::optional<Channel>, kAllModalities.size()> channels_;

    bool in_baseline_ = false;
    std::optional<Timestamp> baseline_end_;
    bool baseline_done_ = false;
    double baseline_sum_ = 0.0;
    std::size_t baseline_n_ = 0;
    std::optional<double> baseline_pa_;
};

[[nodiscard]] inline std::vector<Value> row_values(const FeatureRow& row) {
    std::vector<Value> v;
    v.reserve(row.values.size() + 1);
    v.emplace_back(row.quality);
    for (const auto& x : row.values) {
        if (x)
            v.emplace_back(*x);
        else
            v.emplace_back(std::monostate{});
    }
    return v;
}

/// Live engine: feeds every raw topic present on the bus (plus "sim.meta") through a
/// FeatureProcessor and publishes rows on "feat.<modality>" stamped at the window end.
/// Raw topics must be open before construction.
class BusFeatureEngine {
public:
    explicit BusFeatureEngine(Bus& bus, FeatureConfig cfg = {}) : bus_(bus), proc_(std::move(cfg)) {
        std::set<std::string> inputs;
        for (const auto m : kAllModalities) {
            const auto raw = raw_topic(m);
            if (!bus_.has_topic(raw)) continue;
            proc_.add_stream(m, bus_.descriptor(raw).rate);
            const auto ft = feature_topic(m);
            out_[static_cast<std::size_t>(m)] =
                bus_.has_topic(ft) ? bus_.handle(ft) : bus_.open_topic({ft, topics::feature_schema(m), Rate::from_double(1.0 / proc_.config().stride_s)});
            inputs.insert(raw);
        }
        if (bus_.has_topic(topics::kMeta)) inputs.insert(std::string(topics::kMeta));
        sub_ = bus_.subscribe(inputs, [this](const TimedSample& s) { publish(proc_.feed(s)); });
    }

    BusFeatureEngine(const BusFeatureEngine&) = delete;
    BusFeatureEngine& operator=(const BusFeatureEngine&) = delete;

    ~BusFeatureEngine() { bus_.unsubscribe(sub_); }

    /// Flushes the windows covered at end of stream; call before closing the bus.
    void finish() { publish(proc_.finish()); }

    [[nodiscard]] std::optional<Timestamp> next_emit_lower_bound() const { return proc_.next_emit_lower_bound(); }

private:
    void publish(const std::vector<FeatureRow>& rows) {
        for (const auto& r : rows) bus_.publish(*out_[static_cast<std::size_t>(r.modality)], r.t_end, row_values(r));
    }

    Bus& bus_;
    FeatureProcessor proc_;
    std::array<std::optional<TopicHandle>, kAllModalities.size()> out_;
    Bus::SubscriptionId sub_ = 0;
};

} // namespace mwpipe::features
