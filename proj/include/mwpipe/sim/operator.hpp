#pragma once

// Scripted participant: proportional steering toward the goal, throttle backed off as the
// motor heats, and discrete reactions (radio answers, dish service, CO2 venting, marker
// drop) that fire after a sampled reaction latency.

#include "mwpipe/sim/model.hpp"

#include <limits>

namespace mwpipe::sim {

struct PolicyConfig {
    double latency_mean_s = 0.0;
    double latency_sd_s = 0.0;
    double error_rate = 0.0;
    std::uint64_t seed = 0;

    double throttle_backoff_c = 110.0;
    double throttle_cutoff_c = 120.0;
    double approach_slowdown_m = 20.0;
    double marker_drop_m = 8.0;
    int radar_service_state = 8;
    double radar_target_error_deg = 2.0;
    double vent_at_pct = 80.0;
    double overdrive_min_battery = 50.0;
    double overdrive_min_distance_m = 200.0;
    double overdrive_max_temp_c = 80.0;
    double steer_gain = 1.0 / 45.0;

    /// A participant who never reacts.
    [[nodiscard]] static PolicyConfig unresponsive() {
        PolicyConfig p;
        p.latency_mean_s = std::numeric_limits<double>::infinity();
        return p;
    }
};

inline void validate(const PolicyConfig& p) {
    if (std::isnan(p.latency_mean_s) || p.latency_mean_s < 0.0 || !(p.latency_sd_s >= 0.0) || !(p.error_rate >= 0.0) || p.error_rate > 1.0)
        throw Error(ErrorCode::ConfigError, "operator policy out of range");
}

class ScriptedOperator {
public:
    explicit ScriptedOperator(const PolicyConfig& cfg, std::uint64_t run_seed = 0)
        : cfg_(cfg), rng_(synth::mix_seed(cfg.seed, synth::mix_seed(run_seed, 300))) {
        validate(cfg);
    }

    [[nodiscard]] OperatorAction act(const RoverState& s, const RunSetup& r) {
        const double now = static_cast<double>(s.tick) * r.constants.dt_s;
        OperatorAction a;

        const double dist = distance(s.pos, r.goal);
        const double err = wrap_deg(bearing_deg(s.pos, r.goal) - s.heading_deg);
        a.steer = std::clamp(cfg_.steer_gain * err, -1.0, 1.0);
        double throttle = 1.0;
        if (s.motor_temp_c >= cfg_.throttle_cutoff_c) throttle = 0.0;
        else if (s.motor_temp_c > cfg_.throttle_backoff_c)
            throttle = (cfg_.throttle_cutoff_c - s.motor_temp_c) / (cfg_.throttle_cutoff_c - cfg_.throttle_backoff_c);
        throttle *= std::clamp(dist / cfg_.approach_slowdown_m, 0.15, 1.0);
        // Turn before driving when the goal is well off the nose.
        if (std::abs(err) > 90.0) throttle *= 0.3;
        if (dist <= cfg_.marker_drop_m) throttle = 0.0;
        a.throttle = throttle;

        a.overdrive = s.overdrive_remaining_s <= 0.0 && !s.stalled && s.battery_pct > cfg_.overdrive_min_battery &&
                      dist > cfg_.overdrive_min_distance_m && s.motor_temp_c < cfg_.overdrive_max_temp_c && std::abs(err) < 30.0;

        // Radio: a fresh issue (first or repeat) restarts the reaction clock.
        if (s.pending_prompt) {
            const auto issue = s.pending_prompt->last_issue_tick;
            if (!comm_issue_ || *comm_issue_ != issue) {
                comm_issue_ = issue;
                comm_due_ = now + sample_latency();
            }
            if (now >= comm_due_) {
                const auto& p = *s.pending_prompt;
                const bool wrong = unit_(rng_) < cfg_.error_rate;
                if (p.kind == PromptKind::Switch) {
                    if (wrong) a.acknowledge = true;
                    else a.switch_channel = p.target;
                } else {
                    if (wrong) a.switch_channel = other(s.comm_channel);
                    else a.acknowledge = true;
                }
                comm_due_ = std::numeric_limits<double>::infinity();
            }
        } else {
            comm_issue_.reset();
        }

        if (s.radar_state <= cfg_.radar_service_state && !radar_due_) radar_due_ = now + sample_latency();
        if (radar_due_ && now >= *radar_due_) {
            if (s.radar_error_deg < cfg_.radar_target_error_deg) {
                radar_due_.reset();
            } else {
                const double e = wrap_deg(bearing_deg(s.pos, r.constants.relay) - s.radar_heading_deg);
                a.rotate_dish = e > 0.0 ? 1 : -1;
            }
        }

        if (s.co2_pct >= cfg_.vent_at_pct && !vent_due_) vent_due_ = now + sample_latency();
        if (vent_due_ && now >= *vent_due_) {
            a.vent_co2 = true;
            vent_due_.reset();
        }

        if (!s.marker_dropped && dist <= cfg_.marker_drop_m && !drop_due_) drop_due_ = now + sample_latency();
        if (drop_due_ && now >= *drop_due_) {
            a.drop_marker = true;
            drop_due_.reset();
        }
        return a;
    }

private:
    double sample_latency() {
        if (std::isinf(cfg_.latency_mean_s)) return std::numeric_limits<double>::infinity();
        if (cfg_.latency_sd_s <= 0.0) return cfg_.latency_mean_s;
        return std::max(0.0, std::normal_distribution<double>(cfg_.latency_mean_s, cfg_.latency_sd_s)(rng_));
    }

    PolicyConfig cfg_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::optional<std::uint64_t> comm_issue_;
    double comm_due_ = std::numeric_limits<double>::infinity();
    std::optional<double> radar_due_, vent_due_, drop_due_;
};

} // namespace mwpipe::sim
