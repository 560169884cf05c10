#pragma once

// Closed-loop runs, their evaluation and the telemetry they publish.

#include "mwpipe/payload.hpp"
#include "mwpipe/sim/operator.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace mwpipe::sim {

enum class RunStatus { Completed, FailedBattery, FailedO2, FailedCo2, Aborted };

constexpr std::string_view to_string(RunStatus s) noexcept {
    switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::FailedBattery: return "failed_battery";
    case RunStatus::FailedO2: return "failed_o2";
    case RunStatus::FailedCo2: return "failed_co2";
    case RunStatus::Aborted: return "aborted";
    }
    return "aborted";
}

[[nodiscard]] constexpr bool is_failure(RunStatus s) noexcept {
    return s == RunStatus::FailedBattery || s == RunStatus::FailedO2 || s == RunStatus::FailedCo2;
}

/// Terminal condition reached in this state, if any. Depletion is checked before the
/// marker so a drop on the tick the battery dies still counts as a failure.
[[nodiscard]] inline std::optional<RunStatus> terminal_status(const RoverState& s, const RunSetup& r) noexcept {
    if (s.battery_pct <= 0.0) return RunStatus::FailedBattery;
    if (s.o2_pct <= 0.0) return RunStatus::FailedO2;
    if (s.co2_pct >= 100.0) return RunStatus::FailedCo2;
    if (s.marker_dropped && distance(s.marker_pos, r.goal) <= r.constants.goal_radius_m) return RunStatus::Completed;
    return std::nullopt;
}

struct RunOptions {
    SimConstants constants;
    double breath_rate_bpm = 15.0;
    double timeout_s = 720.0;
    Timestamp start;
};

struct RunTrace {
    RunSetup setup;
    double breath_rate_bpm = 15.0;
    std::vector<RoverState> ticks;
    std::vector<OperatorAction> actions; // actions[i] moves ticks[i] to ticks[i + 1]
};

/// Steps from the initial state until a terminal condition or the timeout. The trace
/// holds the initial state followed by one state per tick.
[[nodiscard]] inline RunTrace simulate_run(std::uint64_t seed, const DifficultyParams& difficulty, const PolicyConfig& policy,
                                           const RunOptions& opt = {}) {
    if (!(opt.breath_rate_bpm > 0.0) || !(opt.timeout_s > 0.0))
        throw Error(ErrorCode::InvalidArgument, "breath rate and timeout must be positive");
    auto [setup, s] = init_run(seed, difficulty, opt.constants, opt.start);
    RunTrace tr{setup, opt.breath_rate_bpm, {}, {}};
    ScriptedOperator op(policy, seed);
    const auto max_ticks = static_cast<std::uint64_t>(std::llround(opt.timeout_s / opt.constants.dt_s));
    tr.ticks.reserve(static_cast<std::size_t>(max_ticks) + 1);
    tr.ticks.push_back(s);
    while (!terminal_status(s, tr.setup) && s.tick < max_ticks) {
        const auto a = op.act(s, tr.setup);
        s = step(s, a, opt.breath_rate_bpm, tr.setup);
        tr.actions.push_back(a);
        tr.ticks.push_back(s);
    }
    return tr;
}

enum class Subsystem { Comms, Radar, Temperature, Co2 };

inline constexpr std::array<std::string_view, 4> kSubsystemNames{"comms", "radar", "temperature", "co2"};

struct AlertStats {
    std::uint32_t alerts = 0;
    std::uint32_t misses = 0;
    std::uint32_t resolved = 0;
    double total_latency_s = 0.0;

    [[nodiscard]] std::optional<double> mean_latency_s() const noexcept {
        if (resolved == 0) return std::nullopt;
        return total_latency_s / resolved;
    }
};

struct RunOutcome {
    RunStatus status = RunStatus::Aborted;
    std::optional<double> completion_time_s;
    double duration_s = 0.0;
    double distance_m = 0.0;
    double battery_used_pct = 0.0;
    double mean_motor_temp_c = 0.0;
    double peak_motor_temp_c = 0.0;
    std::uint32_t prompt_count = 0;
    std::uint32_t vent_count = 0;
    std::uint32_t stall_count = 0;
    std::array<AlertStats, 4> alerts{};

    [[nodiscard]] const AlertStats& alert(Subsystem s) const noexcept { return alerts[static_cast<std::size_t>(s)]; }
};

namespace detail {

// Tracks one alert episode from onset to resolution.
struct Episode {
    std::optional<double> onset;

    void open(double t, AlertStats& st) {
        if (onset) return;
        onset = t;
        ++st.alerts;
    }
    void close(double t, AlertStats& st) {
        if (!onset) return;
        st.total_latency_s += t - *onset;
        ++st.resolved;
        onset.reset();
    }
};

} // namespace detail

/// Alerts per subsystem and their escalations (misses):
///   comms        prompt issued, resolved by the correct answer; each re-prompt is a miss
///   radar        state at or below 8, resolved once the error is under 2 degrees; the warning flash is a miss
///   temperature  motor at 120 C or above, resolved below 110 C; a stall is a miss
///   co2          CO2 at 80 % or above, resolved by venting; reaching 95 % first is a miss
/// Episodes still open when the trace ends also count as misses.
[[nodiscard]] inline RunOutcome evaluate_run(const RunTrace& tr) {
    const auto& ticks = tr.ticks;
    const auto& k = tr.setup.constants;
    if (ticks.empty()) throw Error(ErrorCode::IncompleteTrace, "run trace is empty");
    const auto dt_ns = seconds_to_ns(k.dt_s);
    for (std::size_t i = 1; i < ticks.size(); ++i) {
        if (ticks[i].tick != ticks[i - 1].tick + 1 || ticks[i].t.nanos != ticks[i - 1].t.nanos + dt_ns)
            throw Error(ErrorCode::IncompleteTrace, "run trace has a gap or irregular step at index " + std::to_string(i));
    }

    RunOutcome out;
    std::size_t end = ticks.size() - 1;
    for (std::size_t i = 0; i < ticks.size(); ++i) {
        if (const auto st = terminal_status(ticks[i], tr.setup)) {
            out.status = *st;
            end = i;
            break;
        }
    }
    const auto elapsed = [&](std::size_t i) { return static_cast<double>(ticks[i].tick - ticks.front().tick) * k.dt_s; };
    out.duration_s = elapsed(end);
    if (out.status == RunStatus::Completed) out.completion_time_s = out.duration_s;
    out.distance_m = ticks[end].distance_traveled_m - ticks.front().distance_traveled_m;
    out.battery_used_pct = ticks.front().battery_pct - ticks[end].battery_pct;
    out.prompt_count = ticks[end].prompt_count - ticks.front().prompt_count;

    auto& comms = out.alerts[0];
    auto& radar = out.alerts[1];
    auto& temp = out.alerts[2];
    auto& co2 = out.alerts[3];
    detail::Episode radar_ep, temp_ep, co2_ep;
    bool co2_escalated = false;
    double temp_sum = 0.0;
    for (std::size_t i = 0; i <= end; ++i) {
        const auto& s = ticks[i];
        const double t = elapsed(i);
        const auto* prev = i > 0 ? &ticks[i - 1] : nullptr;
        temp_sum += s.motor_temp_c;
        out.peak_motor_temp_c = std::max(out.peak_motor_temp_c, s.motor_temp_c);

        if (s.comm_request && s.pending_prompt) {
            if (s.pending_prompt->reprompt_count == 0) ++comms.alerts;
            else ++comms.misses;
        }
        if (s.comm_latency_s) {
            ++comms.resolved;
            comms.total_latency_s += *s.comm_latency_s;
        }

        if (s.radar_state <= 8) radar_ep.open(t, radar);
        if (radar_ep.onset && s.radar_error_deg < 2.0) radar_ep.close(t, radar);
        if (s.radar_state < k.flash_below_state && (!prev || prev->radar_state >= k.flash_below_state)) ++radar.misses;

        if (s.motor_temp_c >= 120.0) temp_ep.open(t, temp);
        if (temp_ep.onset && s.motor_temp_c < 110.0) temp_ep.close(t, temp);
        if (s.stalled && (!prev || !prev->stalled)) {
            ++temp.misses;
            ++out.stall_count;
        }

        if (s.vented) {
            ++out.vent_count;
            if (co2_ep.onset) co2_ep.close(t, co2);
            co2_escalated = false;
        }
        if (s.co2_pct >= 80.0) co2_ep.open(t, co2);
        if (co2_ep.onset && s.co2_pct >= 95.0 && !co2_escalated) {
            ++co2.misses;
            co2_escalated = true;
        }
    }
    out.mean_motor_temp_c = temp_sum / static_cast<double>(end + 1);
    if (ticks[end].pending_prompt) ++comms.misses;
    if (radar_ep.onset) ++radar.misses;
    if (temp_ep.onset) ++temp.misses;
    if (co2_ep.onset) ++co2.misses;
    return out;
}

/// Telemetry topics published at the tick rate.
enum class Telemetry { Rover, Resources, Radar, Comms };

inline constexpr std::array<std::string_view, 4> kTelemetryTopics{"sim.rover", "sim.resources", "sim.radar", "sim.comms"};
inline constexpr double kTickHz = 10.0;

[[nodiscard]] inline SchemaPtr telemetry_schema(Telemetry which) {
    using F = FieldType;
    static const std::array<SchemaPtr, 4> schemas{
        make_schema("sim.rover", {{"x_m", F::Float},
                                  {"y_m", F::Float},
                                  {"heading_deg", F::Float},
                                  {"speed_m_s", F::Float},
                                  {"angular_vel_deg_s", F::Float},
                                  {"torque", F::Float},
                                  {"battery_pct", F::Float},
                                  {"motor_temp_c", F::Float},
                                  {"stalled", F::Bool},
                                  {"overdrive", F::Bool},
                                  {"distance_m", F::Float},
                                  {"goal_distance_m", F::Float},
                                  {"marker_dropped", F::Bool},
                                  {"active", F::Bool}}),
        make_schema("sim.resources", {{"o2_pct", F::Float}, {"co2_pct", F::Float}, {"vented", F::Bool}, {"active", F::Bool}}),
        make_schema("sim.radar", {{"state", F::Int},
                                  {"dish_heading_deg", F::Float},
                                  {"error_deg", F::Float},
                                  {"flash_hz", F::Float},
                                  {"active", F::Bool}}),
        make_schema("sim.comms", {{"channel", F::String},
                                  {"request", F::Bool},
                                  {"response", F::Bool},
                                  {"pending", F::Bool},
                                  {"prompt_kind", F::String},
                                  {"reprompt_count", F::Int},
                                  {"active", F::Bool}}),
    };
    return schemas[static_cast<std::size_t>(which)];
}

[[nodiscard]] inline std::vector<Value> telemetry_values(Telemetry which, const RoverState& s, const RunSetup& r, bool active) {
    switch (which) {
    case Telemetry::Rover:
        return {s.pos.x,          s.pos.y,         s.heading_deg, s.speed_m_s, s.angular_vel_deg_s, s.torque,
                s.battery_pct,    s.motor_temp_c,  s.stalled,     s.overdrive_remaining_s > 0.0,    s.distance_traveled_m,
                distance(s.pos, r.goal), s.marker_dropped, active};
    case Telemetry::Resources: return {s.o2_pct, s.co2_pct, s.vented, active};
    case Telemetry::Radar:
        return {std::int64_t{s.radar_state}, s.radar_heading_deg, s.radar_error_deg, s.flash_hz, active};
    case Telemetry::Comms: {
        std::string kind = "none";
        std::int64_t reprompts = 0;
        if (s.pending_prompt) {
            kind = s.pending_prompt->kind == PromptKind::Switch ? "switch" : "report_in";
            reprompts = s.pending_prompt->reprompt_count;
        }
        return {std::string(to_string(s.comm_channel)), s.comm_request, s.comm_response, s.pending_prompt.has_value(), kind, reprompts,
                active};
    }
    }
    return {};
}

} // namespace mwpipe::sim
