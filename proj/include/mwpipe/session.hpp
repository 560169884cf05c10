#pragma once

// The one-hour protocol: a resting baseline, then four runs at alternating difficulty,
// each followed by a TLX survey and (except the last) three minutes of free play.
// Physiology streams continue through every phase; task telemetry keeps its 10 Hz
// cadence but is flagged inactive outside runs.

#include "mwpipe/bag.hpp"
#include "mwpipe/features/engine.hpp"
#include "mwpipe/physio.hpp"
#include "mwpipe/sim/run.hpp"

#include <array>
#include <functional>

namespace mwpipe::session {

using sim::Level;

struct PhaseProfiles {
    synth::SynthProfile baseline;
    synth::SynthProfile free_play;
    synth::SynthProfile low;
    synth::SynthProfile high;

    [[nodiscard]] static PhaseProfiles defaults() {
        PhaseProfiles p;
        auto base = [](double rr, double sdnn, double hf, double bpm, double scr, double pupil, double st_drift) {
            synth::SynthProfile s;
            s.rr_mean_ms = rr;
            s.rr_sdnn_ms = sdnn;
            s.hf_mod_depth_ms = hf;
            s.ecg_noise = 0.02;
            s.ppg_noise = 0.3;
            s.resp_rate_bpm = bpm;
            s.scr_rate_per_min = scr;
            s.eda_noise_uS = 0.001;
            s.st_noise_c = 0.01;
            s.st_drift_c_per_min = st_drift;
            s.pupil_base_mm = pupil;
            s.pupil_mod_mm = 0.1;
            return s;
        };
        p.baseline = base(850.0, 30.0, 25.0, 12.0, 1.0, 4.0, 0.0);
        p.free_play = p.baseline;
        p.low = base(780.0, 25.0, 20.0, 14.0, 2.0, 4.4, -0.02);
        p.high = base(700.0, 15.0, 10.0, 18.0, 4.0, 5.0, -0.05);
        return p;
    }

    [[nodiscard]] const synth::SynthProfile& for_level(Level l) const noexcept { return l == Level::Low ? low : high; }
};

struct TlxResponderConfig {
    std::uint64_t seed = 0;
    int jitter = 5;
};

struct SessionPlan {
    std::uint64_t seed = 1;
    double baseline_s = 300.0;
    double interrun_s = 180.0;
    double run_timeout_s = 720.0;
    std::vector<Level> run_order{Level::Low, Level::High, Level::Low, Level::High};
    PhaseProfiles profiles = PhaseProfiles::defaults();
    sim::PolicyConfig policy = [] {
        sim::PolicyConfig p;
        p.latency_mean_s = 1.5;
        p.latency_sd_s = 0.5;
        p.error_rate = 0.05;
        return p;
    }();
    TlxResponderConfig tlx;
    sim::SimConstants constants;
    sim::DifficultyParams low_difficulty = sim::DifficultyParams::low();
    sim::DifficultyParams high_difficulty = sim::DifficultyParams::high();
    features::FeatureConfig features;

    [[nodiscard]] const sim::DifficultyParams& difficulty(Level l) const noexcept { return l == Level::Low ? low_difficulty : high_difficulty; }
};

/// Throws PlanInvalid. Runs must be two low and two high in alternation.
inline void validate(const SessionPlan& p) {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::PlanInvalid, what); };
    if (p.run_order.size() != 4) bad("run_order must list exactly 4 runs");
    const auto lows = std::count(p.run_order.begin(), p.run_order.end(), Level::Low);
    if (lows != 2) bad("run_order must contain two low and two high runs");
    for (std::size_t i = 1; i < p.run_order.size(); ++i)
        if (p.run_order[i] == p.run_order[i - 1]) bad("run_order must alternate difficulty");
    if (!(p.baseline_s > 0.0) || !(p.interrun_s > 0.0) || !(p.run_timeout_s > 0.0)) bad("phase durations must be > 0");
    for (const double d : {p.baseline_s, p.interrun_s, p.run_timeout_s})
        if (std::abs(d * sim::kTickHz - std::round(d * sim::kTickHz)) > 1e-9) bad("phase durations must be whole ticks");
    const auto& pr = p.profiles;
    for (const auto* s : {&pr.baseline, &pr.free_play, &pr.low, &pr.high})
        if (s->resp_fs_hz != pr.baseline.resp_fs_hz) bad("all phase profiles must share one respiration sample rate");
    if (p.low_difficulty.level != Level::Low || p.high_difficulty.level != Level::High) bad("difficulty levels are mislabeled");
    if (!sim::tightens(p.low_difficulty, p.high_difficulty)) bad("high difficulty must be strictly harder than low in every parameter");
    try {
        sim::validate(p.policy);
        sim::validate(p.low_difficulty);
        sim::validate(p.high_difficulty);
    } catch (const Error& e) {
        bad(e.what());
    }
}

inline constexpr std::array<std::string_view, 6> kTlxScales{"mental", "physical", "temporal", "performance", "effort", "frustration"};

struct TlxResponse {
    int run_index = 0;
    std::array<int, 6> scales{};

    [[nodiscard]] int scale(std::string_view name) const {
        for (std::size_t i = 0; i < kTlxScales.size(); ++i)
            if (kTlxScales[i] == name) return scales[i];
        throw Error(ErrorCode::InvalidArgument, "no TLX scale '" + std::string(name) + "'");
    }
    bool operator==(const TlxResponse&) const = default;
};

/// Throws ScaleOutOfRange unless every scale lies in [0, 100].
[[nodiscard]] inline TlxResponse make_tlx(int run_index, const std::array<int, 6>& scales) {
    for (std::size_t i = 0; i < scales.size(); ++i)
        if (scales[i] < 0 || scales[i] > 100)
            throw Error(ErrorCode::ScaleOutOfRange, std::string(kTlxScales[i]) + " = " + std::to_string(scales[i]) + " is outside [0, 100]");
    return {run_index, scales};
}

struct RunRecord {
    int run_index = 0;
    Level difficulty = Level::Low;
    sim::RunOutcome outcome;
    TlxResponse tlx;
    Timestamp t_start, t_end;
};

/// Difficulty sets the base demand; a failed or aborted run adds 15 to performance
/// (higher is worse) and frustration; each scale gets seeded uniform jitter.
[[nodiscard]] inline TlxResponse collect_tlx(const TlxResponderConfig& cfg, const RunRecord& run) {
    static constexpr std::array<int, 6> low{35, 20, 30, 30, 35, 25};
    static constexpr std::array<int, 6> high{70, 40, 65, 45, 70, 55};
    auto s = run.difficulty == Level::Low ? low : high;
    if (run.outcome.status != sim::RunStatus::Completed) {
        s[3] += 15;
        s[5] += 15;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto h = synth::mix_seed(synth::mix_seed(cfg.seed, static_cast<std::uint64_t>(run.run_index)), i);
        const int span = 2 * cfg.jitter + 1;
        const int j = cfg.jitter > 0 ? static_cast<int>(h % static_cast<std::uint64_t>(span)) - cfg.jitter : 0;
        s[i] = std::clamp(s[i] + j, 0, 100);
    }
    return make_tlx(run.run_index, s);
}

[[nodiscard]] inline SchemaPtr tlx_schema() {
    static const SchemaPtr s = [] {
        std::vector<FieldSpec> f{{"run_index", FieldType::Int}, {"difficulty", FieldType::String}, {"status", FieldType::String}};
        for (const auto n : kTlxScales) f.push_back({std::string(n), FieldType::Int});
        return make_schema(std::string(topics::kTlx), std::move(f));
    }();
    return s;
}

struct PhaseSpan {
    std::string phase;
    int run_index = 0;
    std::optional<Level> difficulty;
    Timestamp start, end;
};

struct SessionResult {
    std::vector<RunRecord> runs;
    std::vector<PhaseSpan> phases;
    bool aborted = false;
    std::string error;
};

using TlxResponder = std::function<TlxResponse(const RunRecord&)>;

[[nodiscard]] inline bag::json plan_summary(const SessionPlan& p) {
    bag::json order = bag::json::array();
    for (const auto l : p.run_order) order.push_back(to_string(l));
    return {{"seed", p.seed},
            {"baseline_s", p.baseline_s},
            {"interrun_s", p.interrun_s},
            {"run_timeout_s", p.run_timeout_s},
            {"run_order", std::move(order)},
            {"window_s", p.features.window_s},
            {"stride_s", p.features.stride_s}};
}

/// Drives one session on a bus. The constructor opens every topic and starts the live
/// feature engine, so subscribers and recorders attached before run() see everything.
class SessionRunner {
public:
    SessionRunner(const SessionPlan& plan, Bus& bus) : plan_(plan), bus_(bus) {
        validate(plan_);
        physio_ = open_physio_topics(bus_, plan_.profiles.baseline.resp_fs_hz);
        for (std::size_t i = 0; i < telemetry_.size(); ++i) {
            const auto which = static_cast<sim::Telemetry>(i);
            telemetry_[i] = bus_.open_topic({std::string(sim::kTelemetryTopics[i]), sim::telemetry_schema(which), Rate::hz(10)});
        }
        meta_ = bus_.open_topic({std::string(topics::kMeta), topics::meta_schema(), Rate::hz(10)});
        tlx_ = bus_.open_topic({std::string(topics::kTlx), tlx_schema(), Rate::aperiodic()});
        engine_.emplace(bus_, plan_.features);
    }

    /// Runs every phase, flushes the feature engine and closes the bus. A library error
    /// stops the session early; the result is flagged aborted and the bus is still
    /// closed so recorders finish a valid, truncated bag.
    SessionResult run(const TlxResponder& responder = {}) {
        SessionResult result;
        try {
            run_phases(result, responder);
        } catch (const Error& e) {
            result.aborted = true;
            result.error = e.what();
        }
        try {
            engine_->finish();
        } catch (const Error& e) {
            if (!result.aborted) {
                result.aborted = true;
                result.error = e.what();
            }
        }
        bus_.close();
        return result;
    }

private:
    struct Parked {
        sim::RunSetup setup;
        sim::RoverState state;
    };

    void run_phases(SessionResult& result, const TlxResponder& responder) {
        const auto first = sim::init_run(run_seed(1), plan_.difficulty(plan_.run_order[0]), plan_.constants);
        Parked parked{first.first, first.second};
        Timestamp t{0};
        std::uint64_t phase_index = 0;

        auto idle = [&](const std::string& name, double seconds, const synth::SynthProfile& profile) {
            const auto n = static_cast<std::size_t>(std::llround(seconds * sim::kTickHz));
            const Timestamp end = tick_time(t, n);
            publish_phase(t, end, profile, phase_index++, n, [&](std::size_t) -> const sim::RoverState& { return parked.state; },
                          parked.setup, false, name, 0, "none");
            result.phases.push_back({name, 0, std::nullopt, t, end});
            t = end;
        };

        idle("baseline", plan_.baseline_s, plan_.profiles.baseline);
        for (std::size_t r = 0; r < plan_.run_order.size(); ++r) {
            const int run_index = static_cast<int>(r) + 1;
            const Level level = plan_.run_order[r];
            const auto& profile = plan_.profiles.for_level(level);
            sim::RunOptions opt;
            opt.constants = plan_.constants;
            opt.breath_rate_bpm = profile.resp_rate_bpm;
            opt.timeout_s = plan_.run_timeout_s;
            opt.start = t;
            const auto trace = sim::simulate_run(run_seed(run_index), plan_.difficulty(level), plan_.policy, opt);
            const Timestamp end = tick_time(t, trace.ticks.size());
            publish_phase(t, end, profile, phase_index++, trace.ticks.size(),
                          [&](std::size_t i) -> const sim::RoverState& { return trace.ticks[i]; }, trace.setup, true, "run", run_index,
                          std::string(to_string(level)));
            result.phases.push_back({"run", run_index, level, t, end});

            RunRecord rec{run_index, level, sim::evaluate_run(trace), {}, t, end};
            rec.tlx = responder ? responder(rec) : collect_tlx(plan_.tlx, rec);
            (void)make_tlx(rec.tlx.run_index, rec.tlx.scales);
            std::vector<Value> v{std::int64_t{run_index}, std::string(to_string(level)), std::string(to_string(rec.outcome.status))};
            for (const int s : rec.tlx.scales) v.emplace_back(std::int64_t{s});
            bus_.publish(tlx_, end, std::move(v));
            result.runs.push_back(rec);

            parked = {trace.setup, trace.ticks.back()};
            t = end;
            if (r + 1 < plan_.run_order.size()) idle("free_play", plan_.interrun_s, plan_.profiles.free_play);
        }
        bus_.publish(meta_, t, meta_values("end", 0, "none", 0.0, t));
        result.phases.push_back({"end", 0, std::nullopt, t, t});
    }

    template <class StateAt>
    void publish_phase(Timestamp start, Timestamp end, const synth::SynthProfile& base, std::uint64_t phase_index, std::size_t ticks,
                       StateAt state_at, const sim::RunSetup& setup, bool active, const std::string& phase, int run_index,
                       const std::string& difficulty) {
        auto profile = base;
        profile.seed = synth::mix_seed(plan_.seed, 1000 + phase_index);
        const auto streams = render_physio(profile, start, end);
        auto pending = pending_physio(streams, physio_);
        auto tick_t = [start](std::size_t i) { return tick_time(start, i); };
        for (std::size_t k = 0; k < telemetry_.size(); ++k) {
            const auto which = static_cast<sim::Telemetry>(k);
            pending.push_back({telemetry_[k], ticks, tick_t,
                               [&, which](std::size_t i) { return sim::telemetry_values(which, state_at(i), setup, active); }});
        }
        pending.push_back({meta_, ticks, tick_t, [&](std::size_t i) {
                               return meta_values(phase, run_index, difficulty, static_cast<double>(i) / sim::kTickHz, tick_t(i));
                           }});
        Timestamp next_advance = start;
        publish_in_order(bus_, pending, [&](Timestamp ts) {
            if (ts < next_advance) return;
            advance_to(ts);
            next_advance = Timestamp{ts.nanos + kNanosPerSecond};
        });
        advance_to(end);
    }

    void advance_to(Timestamp t) {
        if (const auto bound = engine_->next_emit_lower_bound()) t = std::min(t, *bound);
        bus_.advance_watermark(t);
    }

    [[nodiscard]] std::vector<Value> meta_values(const std::string& phase, int run_index, const std::string& difficulty, double elapsed,
                                                 Timestamp t) const {
        return {phase, std::int64_t{run_index}, difficulty, elapsed, t.seconds()};
    }

    [[nodiscard]] static Timestamp tick_time(Timestamp start, std::size_t i) noexcept {
        return Timestamp{start.nanos + static_cast<std::uint64_t>(i) * (kNanosPerSecond / 10)};
    }

    [[nodiscard]] std::uint64_t run_seed(int run_index) const noexcept {
        return synth::mix_seed(plan_.seed, static_cast<std::uint64_t>(run_index));
    }

    SessionPlan plan_;
    Bus& bus_;
    PhysioHandles physio_;
    std::array<TopicHandle, 4> telemetry_;
    TopicHandle meta_, tlx_;
    std::optional<features::BusFeatureEngine> engine_;
};

/// Runs a session on a fresh bus and records every topic into one bag.
inline SessionResult run_session(const SessionPlan& plan, const std::string& bag_path, const TlxResponder& responder = {},
                                 std::optional<std::uint64_t> epoch_unix_ns = {}) {
    Bus bus;
    SessionRunner runner(plan, bus);
    bag::BagRecorder recorder(bus, bag_path, plan_summary(plan), epoch_unix_ns);
    return runner.run(responder);
}

} // namespace mwpipe::session
