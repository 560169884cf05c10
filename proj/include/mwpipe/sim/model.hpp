#pragma once

// Fixed-step rover task model: motion over a seeded heightfield, motor heat and stall,
// battery, life support, radar dish tracking and radio prompts. Every step function is
// a pure map from (state, action) to the next state; randomness is drawn from hashes of
// the run seed so the state itself stays small and copyable.

#include "mwpipe/error.hpp"
#include "mwpipe/synth.hpp"
#include "mwpipe/time.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>

namespace mwpipe::sim {

struct Vec2 {
    double x = 0.0, y = 0.0;
    bool operator==(const Vec2&) const = default;
};

[[nodiscard]] inline double distance(Vec2 a, Vec2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

/// Wraps an angle in degrees to (-180, 180].
[[nodiscard]] inline double wrap_deg(double a) noexcept {
    a = std::fmod(a, 360.0);
    if (a > 180.0) a -= 360.0;
    if (a <= -180.0) a += 360.0;
    return a;
}

[[nodiscard]] inline double bearing_deg(Vec2 from, Vec2 to) noexcept {
    return std::atan2(to.y - from.y, to.x - from.x) * 180.0 / std::numbers::pi;
}

enum class Level { Low, High };

constexpr std::string_view to_string(Level l) noexcept { return l == Level::Low ? "low" : "high"; }

inline Level parse_level(std::string_view s) {
    if (s == "low") return Level::Low;
    if (s == "high") return Level::High;
    throw Error(ErrorCode::ConfigError, "difficulty must be 'low' or 'high', got '" + std::string(s) + "'");
}

struct DifficultyParams {
    Level level = Level::Low;
    double comm_mean_interval_s = 45.0;
    double radar_decay_deg_per_s = 0.5;
    double battery_drain_scale = 1.0;
    double temp_gain_scale = 1.0;
    double terrain_roughness = 0.5;
    double co2_rate_scale = 1.0;

    [[nodiscard]] static DifficultyParams low() { return {}; }
    [[nodiscard]] static DifficultyParams high() { return {Level::High, 20.0, 1.5, 1.3, 1.35, 1.0, 1.3}; }
    [[nodiscard]] static DifficultyParams for_level(Level l) { return l == Level::Low ? low() : high(); }

    bool operator==(const DifficultyParams&) const = default;
};

/// True when `hard` is strictly more demanding than `easy` in every field.
[[nodiscard]] inline bool tightens(const DifficultyParams& easy, const DifficultyParams& hard) noexcept {
    return hard.comm_mean_interval_s < easy.comm_mean_interval_s && hard.radar_decay_deg_per_s > easy.radar_decay_deg_per_s &&
           hard.battery_drain_scale > easy.battery_drain_scale && hard.temp_gain_scale > easy.temp_gain_scale &&
           hard.terrain_roughness > easy.terrain_roughness && hard.co2_rate_scale > easy.co2_rate_scale;
}

inline void validate(const DifficultyParams& d) {
    if (!(d.comm_mean_interval_s > 0.0) || d.radar_decay_deg_per_s < 0.0 || !(d.battery_drain_scale > 0.0) ||
        !(d.temp_gain_scale > 0.0) || d.terrain_roughness < 0.0 || !(d.co2_rate_scale > 0.0))
        throw Error(ErrorCode::ConfigError, "difficulty parameters out of range");
}

struct SimConstants {
    double dt_s = 0.1;
    double map_size_m = 1000.0;
    double min_separation_m = 300.0;
    double goal_radius_m = 10.0;
    Vec2 relay{500.0, 1000.0};

    double v_max_m_s = 3.0;
    double turn_rate_deg_s = 45.0;
    double lunar_gravity_g = 0.166;
    double slope_torque_gain = 6.0;
    double terrain_amplitude_m = 12.0;

    double ambient_c = 50.0;
    double k_heat = 1.2;
    double k_cool = 0.02;
    double stall_c = 140.0;
    double release_c = 90.0;

    double c_speed = 0.015;
    double c_torque = 0.03;
    double c_heat = 0.004;

    double overdrive_s = 10.0;
    double overdrive_speed = 1.5;
    double overdrive_torque = 1.6;
    double overdrive_surcharge_pct = 5.0;

    double k_o2 = 100.0 / (2700.0 * 15.0);
    double k_co2 = 80.0 / (90.0 * 15.0);

    double dish_slew_deg_s = 20.0;
    double radar_bin_deg = 15.0;
    int flash_below_state = 4;
    double flash_base_hz = 1.0;
    double flash_doubling_s = 10.0;

    double reprompt_base_s = 16.0;
    double reprompt_floor_s = 2.0;
    double report_in_fraction = 0.2;
};

inline constexpr int kRadarStates = 12;

[[nodiscard]] inline int radar_state_for(double error_deg, double bin_deg = 15.0) noexcept {
    const int drop = static_cast<int>(std::floor(std::abs(error_deg) / bin_deg));
    return std::clamp(kRadarStates - 1 - drop, 0, kRadarStates - 1);
}

enum class Channel { A, B };

constexpr std::string_view to_string(Channel c) noexcept { return c == Channel::A ? "A" : "B"; }
constexpr Channel other(Channel c) noexcept { return c == Channel::A ? Channel::B : Channel::A; }

enum class PromptKind { Switch, ReportIn };

struct Prompt {
    PromptKind kind = PromptKind::Switch;
    Channel target = Channel::A;
    std::uint64_t issued_tick = 0;
    std::uint64_t last_issue_tick = 0;
    std::uint64_t next_reissue_tick = 0;
    std::uint32_t reprompt_count = 0;

    bool operator==(const Prompt&) const = default;
};

struct RoverState {
    std::uint64_t tick = 0;
    Timestamp t;

    Vec2 pos;
    double heading_deg = 0.0;
    double speed_m_s = 0.0;
    double angular_vel_deg_s = 0.0;
    double torque = 0.0;
    double battery_pct = 100.0;
    double motor_temp_c = 50.0;
    bool stalled = false;
    double overdrive_remaining_s = 0.0;
    double distance_traveled_m = 0.0;

    double o2_pct = 100.0;
    double co2_pct = 0.0;
    bool vented = false;

    int radar_state = kRadarStates - 1;
    double radar_heading_deg = 0.0;
    double dish_offset_deg = 0.0;
    double radar_error_deg = 0.0;
    double flash_elapsed_s = 0.0;
    double flash_hz = 0.0;

    Channel comm_channel = Channel::A;
    std::optional<Prompt> pending_prompt;
    std::uint64_t next_prompt_tick = 0;
    std::uint32_t prompt_count = 0;
    bool comm_request = false;
    bool comm_response = false;
    std::optional<double> comm_latency_s;

    bool marker_dropped = false;
    Vec2 marker_pos;

    bool operator==(const RoverState&) const = default;
};

struct OperatorAction {
    double throttle = 0.0;
    double steer = 0.0;
    int rotate_dish = 0;
    std::optional<Channel> switch_channel;
    bool acknowledge = false;
    bool vent_co2 = false;
    bool overdrive = false;
    bool drop_marker = false;

    bool operator==(const OperatorAction&) const = default;
};

/// Smooth seeded heightfield: a few oblique sinusoids scaled by roughness.
class Terrain {
public:
    Terrain() = default;
    Terrain(std::uint64_t seed, double roughness, double amplitude_m) {
        std::mt19937_64 rng(synth::mix_seed(seed, 101));
        std::uniform_real_distribution<double> wl(150.0, 450.0), ang(0.0, 2.0 * std::numbers::pi), amp(0.5, 1.0);
        for (auto& c : comps_) {
            const double k = 2.0 * std::numbers::pi / wl(rng);
            const double a = ang(rng);
            c = {k * std::cos(a), k * std::sin(a), ang(rng), roughness * amplitude_m * amp(rng) / static_cast<double>(comps_.size())};
        }
    }

    [[nodiscard]] double height(Vec2 p) const noexcept {
        double h = 0.0;
        for (const auto& c : comps_) h += c.amp * std::sin(c.kx * p.x + c.ky * p.y + c.phase);
        return h;
    }

    /// Rise over run along a heading, from the analytic gradient.
    [[nodiscard]] double grade(Vec2 p, double heading_deg) const noexcept {
        const double r = heading_deg * std::numbers::pi / 180.0;
        double gx = 0.0, gy = 0.0;
        for (const auto& c : comps_) {
            const double d = c.amp * std::cos(c.kx * p.x + c.ky * p.y + c.phase);
            gx += d * c.kx;
            gy += d * c.ky;
        }
        return gx * std::cos(r) + gy * std::sin(r);
    }

private:
    struct Component {
        double kx = 0.0, ky = 0.0, phase = 0.0, amp = 0.0;
    };
    std::array<Component, 4> comps_{};
};

[[nodiscard]] inline double terrain_speed_factor(double grade) noexcept { return std::clamp(1.0 - 1.5 * std::abs(grade), 0.4, 1.0); }

/// Everything fixed for one run.
struct RunSetup {
    std::uint64_t seed = 0;
    DifficultyParams difficulty;
    SimConstants constants;
    Terrain terrain;
    Vec2 goal;
    double dish_drift_sign = 1.0;
};

namespace detail {

[[nodiscard]] inline double hash_uniform(std::uint64_t seed, std::uint64_t salt, std::uint64_t index) noexcept {
    const auto h = synth::mix_seed(synth::mix_seed(seed, salt), index);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

[[nodiscard]] inline std::uint64_t seconds_to_ticks(double s, double dt) noexcept {
    return static_cast<std::uint64_t>(std::max(1.0, std::ceil(s / dt - 1e-9)));
}

[[nodiscard]] inline std::uint64_t next_arrival_tick(const RunSetup& r, std::uint64_t from_tick, std::uint32_t index) noexcept {
    const double gap = -r.difficulty.comm_mean_interval_s * std::log(hash_uniform(r.seed, 201, index));
    return from_tick + seconds_to_ticks(gap, r.constants.dt_s);
}

} // namespace detail

/// Rover and goal uniformly on the map at least min_separation apart, full resources,
/// ambient motor temperature, dish aligned with the relay.
[[nodiscard]] inline std::pair<RunSetup, RoverState> init_run(std::uint64_t seed, const DifficultyParams& difficulty,
                                                              const SimConstants& k = {}, Timestamp start = {}) {
    validate(difficulty);
    RunSetup setup{seed, difficulty, k, Terrain(seed, difficulty.terrain_roughness, k.terrain_amplitude_m), {}, 1.0};
    std::mt19937_64 rng(synth::mix_seed(seed, 100));
    std::uniform_real_distribution<double> coord(0.0, k.map_size_m), unit(0.0, 1.0);
    RoverState s;
    do {
        s.pos = {coord(rng), coord(rng)};
        setup.goal = {coord(rng), coord(rng)};
    } while (distance(s.pos, setup.goal) < k.min_separation_m);
    s.heading_deg = wrap_deg(unit(rng) * 360.0);
    setup.dish_drift_sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    s.t = start;
    s.motor_temp_c = k.ambient_c;
    s.dish_offset_deg = wrap_deg(bearing_deg(s.pos, k.relay) - s.heading_deg);
    s.radar_heading_deg = wrap_deg(s.heading_deg + s.dish_offset_deg);
    s.radar_error_deg = std::abs(wrap_deg(s.radar_heading_deg - bearing_deg(s.pos, k.relay)));
    s.radar_state = radar_state_for(s.radar_error_deg, k.radar_bin_deg);
    s.next_prompt_tick = detail::next_arrival_tick(setup, 0, 0);
    return {setup, s};
}

/// Motion, motor heat, stall latch, battery and life support.
[[nodiscard]] inline RoverState step_dynamics(const RoverState& s, const OperatorAction& a, double breath_rate_bpm, const RunSetup& r) {
    const auto& k = r.constants;
    const double dt = k.dt_s;
    RoverState n = s;
    const double throttle = std::clamp(a.throttle, 0.0, 1.0);
    const double steer = std::clamp(a.steer, -1.0, 1.0);

    if (a.overdrive && s.overdrive_remaining_s <= 0.0 && !s.stalled) {
        n.overdrive_remaining_s = k.overdrive_s;
        n.battery_pct -= k.overdrive_surcharge_pct;
    }
    const bool boosted = n.overdrive_remaining_s > 0.0;

    const double grade = r.terrain.grade(s.pos, s.heading_deg);
    double torque = s.stalled ? 0.0 : throttle * (boosted ? k.overdrive_torque : 1.0);
    torque *= 1.0 + k.slope_torque_gain * k.lunar_gravity_g * std::max(0.0, grade);

    n.motor_temp_c = s.motor_temp_c + dt * (k.k_heat * r.difficulty.temp_gain_scale * torque * torque - k.k_cool * (s.motor_temp_c - k.ambient_c));
    n.motor_temp_c = std::clamp(n.motor_temp_c, 20.0, 200.0);
    if (n.motor_temp_c >= k.stall_c) n.stalled = true;
    else if (s.stalled && n.motor_temp_c <= k.release_c) n.stalled = false;

    if (n.stalled) {
        torque = 0.0;
        n.speed_m_s = 0.0;
        n.angular_vel_deg_s = 0.0;
    } else {
        n.speed_m_s = throttle * k.v_max_m_s * (boosted ? k.overdrive_speed : 1.0) * terrain_speed_factor(grade);
        n.angular_vel_deg_s = steer * k.turn_rate_deg_s;
    }
    n.torque = torque;
    n.heading_deg = wrap_deg(s.heading_deg + n.angular_vel_deg_s * dt);
    const double rad = n.heading_deg * std::numbers::pi / 180.0;
    const Vec2 next{std::clamp(s.pos.x + n.speed_m_s * dt * std::cos(rad), 0.0, k.map_size_m),
                    std::clamp(s.pos.y + n.speed_m_s * dt * std::sin(rad), 0.0, k.map_size_m)};
    n.distance_traveled_m = s.distance_traveled_m + distance(s.pos, next);
    n.pos = next;
    if (boosted) n.overdrive_remaining_s = std::max(0.0, n.overdrive_remaining_s - dt);

    const double drain =
        k.c_speed * n.speed_m_s + k.c_torque * torque + k.c_heat * std::max(0.0, n.motor_temp_c - 100.0);
    n.battery_pct = std::clamp(n.battery_pct - dt * r.difficulty.battery_drain_scale * drain, 0.0, 100.0);

    n.o2_pct = std::clamp(s.o2_pct - dt * k.k_o2 * breath_rate_bpm, 0.0, 100.0);
    n.vented = a.vent_co2;
    n.co2_pct = a.vent_co2 ? 0.0 : std::clamp(s.co2_pct + dt * r.difficulty.co2_rate_scale * k.k_co2 * breath_rate_bpm, 0.0, 100.0);
    return n;
}

/// Dish heading follows the rover body, drifts at the difficulty decay rate and slews
/// on command; the 12 radar states bin the pointing error. Below the flash threshold a
/// warning flashes at a rate that doubles every flash_doubling_s.
[[nodiscard]] inline RoverState update_radar(const RoverState& s, const OperatorAction& a, const RunSetup& r) {
    const auto& k = r.constants;
    RoverState n = s;
    const int rot = std::clamp(a.rotate_dish, -1, 1);
    n.dish_offset_deg =
        wrap_deg(s.dish_offset_deg + k.dt_s * (rot * k.dish_slew_deg_s + r.dish_drift_sign * r.difficulty.radar_decay_deg_per_s));
    n.radar_heading_deg = wrap_deg(s.heading_deg + n.dish_offset_deg);
    n.radar_error_deg = std::abs(wrap_deg(n.radar_heading_deg - bearing_deg(s.pos, k.relay)));
    n.radar_state = radar_state_for(n.radar_error_deg, k.radar_bin_deg);
    if (n.radar_state < k.flash_below_state) {
        n.flash_elapsed_s = s.radar_state < k.flash_below_state ? s.flash_elapsed_s + k.dt_s : 0.0;
        n.flash_hz = k.flash_base_hz * std::exp2(std::floor(n.flash_elapsed_s / k.flash_doubling_s + 1e-9));
    } else {
        n.flash_elapsed_s = 0.0;
        n.flash_hz = 0.0;
    }
    return n;
}

/// Answers, re-prompts and new arrivals for the radio task. Prompts arrive as a Poisson
/// process while none is pending; an unanswered prompt re-issues after reprompt_base_s,
/// halving each time down to reprompt_floor_s.
[[nodiscard]] inline RoverState step_comms(const RoverState& s, const OperatorAction& a, const RunSetup& r) {
    const auto& k = r.constants;
    RoverState n = s;
    n.comm_request = false;
    n.comm_response = false;
    n.comm_latency_s.reset();

    if (a.switch_channel) n.comm_channel = *a.switch_channel;
    if (n.pending_prompt) {
        const auto& p = *n.pending_prompt;
        const bool answered = p.kind == PromptKind::Switch ? (a.switch_channel && *a.switch_channel == p.target)
                                                           : (a.acknowledge && !a.switch_channel);
        if (answered) {
            n.comm_response = true;
            n.comm_latency_s = static_cast<double>(n.tick - p.issued_tick) * k.dt_s;
            n.pending_prompt.reset();
            n.next_prompt_tick = detail::next_arrival_tick(r, n.tick, n.prompt_count);
        } else if (n.tick >= p.next_reissue_tick) {
            auto& q = *n.pending_prompt;
            const double gap = std::max(k.reprompt_floor_s, k.reprompt_base_s / std::exp2(static_cast<double>(q.reprompt_count + 1)));
            ++q.reprompt_count;
            q.last_issue_tick = n.tick;
            q.next_reissue_tick = n.tick + detail::seconds_to_ticks(gap, k.dt_s);
            n.comm_request = true;
        }
    } else if (n.tick >= n.next_prompt_tick) {
        Prompt p;
        p.kind = detail::hash_uniform(r.seed, 202, n.prompt_count) < k.report_in_fraction ? PromptKind::ReportIn : PromptKind::Switch;
        p.target = p.kind == PromptKind::Switch ? other(n.comm_channel) : n.comm_channel;
        p.issued_tick = p.last_issue_tick = n.tick;
        p.next_reissue_tick = n.tick + detail::seconds_to_ticks(k.reprompt_base_s, k.dt_s);
        n.pending_prompt = p;
        ++n.prompt_count;
        n.comm_request = true;
    }
    return n;
}

/// One full tick: dynamics, radar, comms, marker.
[[nodiscard]] inline RoverState step(const RoverState& s, const OperatorAction& a, double breath_rate_bpm, const RunSetup& r) {
    RoverState n = step_dynamics(s, a, breath_rate_bpm, r);
    n.tick = s.tick + 1;
    n.t = Timestamp{s.t.nanos + seconds_to_ns(r.constants.dt_s)};
    n = update_radar(n, a, r);
    n = step_comms(n, a, r);
    if (a.drop_marker && !s.marker_dropped) {
        n.marker_dropped = true;
        n.marker_pos = n.pos;
    }
    return n;
}

} // namespace mwpipe::sim
