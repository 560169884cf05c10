#pragma once

// JSON configuration. Every key is optional and falls back to the built-in default;
// unknown keys are rejected so typos do not silently become defaults.
//
//   {
//     "seed": 1,
//     "session":  { "baseline_s", "interrun_s", "run_timeout_s", "run_order",
//                   "profiles": { "baseline", "free_play", "low", "high" },
//                   "policy", "tlx", "difficulty": { "low", "high" } },
//     "sim":      { physical constants },
//     "features": { "window_s", "stride_s", "min_quality", "beats", "eda", "gaze" }
//   }
//
// A profile file for the synth command is a bare synthesis profile object.

#include "mwpipe/session.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mwpipe::config {

using json = nlohmann::ordered_json;

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// Field lists shared by reading and writing.

template <class V>
void fields(V& v, synth::ScrEvent& e) {
    v("time_s", e.time_s);
    v("amplitude_uS", e.amplitude_uS);
}

template <class V>
void fields(V& v, synth::GazeEvent& e) {
    v("kind", e.kind);
    v("start_s", e.start_s);
    v("duration_s", e.duration_s);
    v("amplitude_deg", e.amplitude_deg);
    v("velocity_deg_s", e.velocity_deg_s);
    v("direction_deg", e.direction_deg);
    v("has_target", e.has_target);
    v("target_x_deg", e.target_x_deg);
    v("target_y_deg", e.target_y_deg);
}

template <class V>
void fields(V& v, synth::SynthProfile& p) {
    v("seed", p.seed);
    v("duration_s", p.duration_s);
    v("rr_mean_ms", p.rr_mean_ms);
    v("rr_sdnn_ms", p.rr_sdnn_ms);
    v("hf_mod_hz", p.hf_mod_hz);
    v("hf_mod_depth_ms", p.hf_mod_depth_ms);
    v("ecg_noise", p.ecg_noise);
    v("ppg_amp", p.ppg_amp);
    v("ppg_dicrotic_ratio", p.ppg_dicrotic_ratio);
    v("ppg_noise", p.ppg_noise);
    v("resp_rate_bpm", p.resp_rate_bpm);
    v("resp_fs_hz", p.resp_fs_hz);
    v("scr_events", p.scr_events);
    v("scr_rate_per_min", p.scr_rate_per_min);
    v("eda_tonic_uS", p.eda_tonic_uS);
    v("eda_drift_uS_per_min", p.eda_drift_uS_per_min);
    v("eda_noise_uS", p.eda_noise_uS);
    v("st_base_c", p.st_base_c);
    v("st_drift_c_per_min", p.st_drift_c_per_min);
    v("st_noise_c", p.st_noise_c);
    v("gaze_script", p.gaze_script);
    v("gaze_noise_deg", p.gaze_noise_deg);
    v("pupil_base_mm", p.pupil_base_mm);
    v("pupil_mod_mm", p.pupil_mod_mm);
}

template <class V>
void fields(V& v, features::BeatConfig& c) {
    v("refractory_s", c.refractory_s);
    v("threshold_fraction", c.threshold_fraction);
    v("rolling_max_half_s", c.rolling_max_half_s);
    v("refine_half_s", c.refine_half_s);
    v("ppg_refine_half_s", c.ppg_refine_half_s);
}

template <class V>
void fields(V& v, features::EdaConfig& c) {
    v("median_window_s", c.median_window_s);
    v("onset_slope_uS_per_s", c.onset_slope_uS_per_s);
    v("min_amplitude_uS", c.min_amplitude_uS);
    v("min_data_s", c.min_data_s);
}

template <class V>
void fields(V& v, features::GazeConfig& c) {
    v("saccade_speed_deg_s", c.saccade_speed_deg_s);
    v("saccade_min_samples", c.saccade_min_samples);
    v("pso_window_s", c.pso_window_s);
    v("pso_max_s", c.pso_max_s);
    v("pso_speed_deg_s", c.pso_speed_deg_s);
    v("pursuit_min_speed_deg_s", c.pursuit_min_speed_deg_s);
    v("pursuit_max_speed_deg_s", c.pursuit_max_speed_deg_s);
    v("pursuit_max_turn_deg", c.pursuit_max_turn_deg);
    v("pursuit_min_s", c.pursuit_min_s);
    v("fixation_dispersion_deg", c.fixation_dispersion_deg);
    v("fixation_min_s", c.fixation_min_s);
    v("bridge_max_s", c.bridge_max_s);
    v("max_invalid_fraction", c.max_invalid_fraction);
}

template <class V>
void fields(V& v, features::FeatureConfig& c) {
    v("window_s", c.window_s);
    v("stride_s", c.stride_s);
    v("min_quality", c.min_quality);
    v("beats", c.beats);
    v("eda", c.eda);
    v("gaze", c.gaze);
}

template <class V>
void fields(V& v, sim::SimConstants& k) {
    v("dt_s", k.dt_s);
    v("map_size_m", k.map_size_m);
    v("min_separation_m", k.min_separation_m);
    v("goal_radius_m", k.goal_radius_m);
    v("relay", k.relay);
    v("v_max_m_s", k.v_max_m_s);
    v("turn_rate_deg_s", k.turn_rate_deg_s);
    v("lunar_gravity_g", k.lunar_gravity_g);
    v("slope_torque_gain", k.slope_torque_gain);
    v("terrain_amplitude_m", k.terrain_amplitude_m);
    v("ambient_c", k.ambient_c);
    v("k_heat", k.k_heat);
    v("k_cool", k.k_cool);
    v("stall_c", k.stall_c);
    v("release_c", k.release_c);
    v("c_speed", k.c_speed);
    v("c_torque", k.c_torque);
    v("c_heat", k.c_heat);
    v("overdrive_s", k.overdrive_s);
    v("overdrive_speed", k.overdrive_speed);
    v("overdrive_torque", k.overdrive_torque);
    v("overdrive_surcharge_pct", k.overdrive_surcharge_pct);
    v("k_o2", k.k_o2);
    v("k_co2", k.k_co2);
    v("dish_slew_deg_s", k.dish_slew_deg_s);
    v("radar_bin_deg", k.radar_bin_deg);
    v("flash_below_state", k.flash_below_state);
    v("flash_base_hz", k.flash_base_hz);
    v("flash_doubling_s", k.flash_doubling_s);
    v("reprompt_base_s", k.reprompt_base_s);
    v("reprompt_floor_s", k.reprompt_floor_s);
    v("report_in_fraction", k.report_in_fraction);
}

template <class V>
void fields(V& v, sim::DifficultyParams& d) {
    v("comm_mean_interval_s", d.comm_mean_interval_s);
    v("radar_decay_deg_per_s", d.radar_decay_deg_per_s);
    v("battery_drain_scale", d.battery_drain_scale);
    v("temp_gain_scale", d.temp_gain_scale);
    v("terrain_roughness", d.terrain_roughness);
    v("co2_rate_scale", d.co2_rate_scale);
}

template <class V>
void fields(V& v, sim::PolicyConfig& p) {
    v("latency_mean_s", p.latency_mean_s);
    v("latency_sd_s", p.latency_sd_s);
    v("error_rate", p.error_rate);
    v("seed", p.seed);
    v("throttle_backoff_c", p.throttle_backoff_c);
    v("throttle_cutoff_c", p.throttle_cutoff_c);
    v("approach_slowdown_m", p.approach_slowdown_m);
    v("marker_drop_m", p.marker_drop_m);
    v("radar_service_state", p.radar_service_state);
    v("radar_target_error_deg", p.radar_target_error_deg);
    v("vent_at_pct", p.vent_at_pct);
    v("overdrive_min_battery", p.overdrive_min_battery);
    v("overdrive_min_distance_m", p.overdrive_min_distance_m);
    v("overdrive_max_temp_c", p.overdrive_max_temp_c);
    v("steer_gain", p.steer_gain);
}

template <class V>
void fields(V& v, session::TlxResponderConfig& c) {
    v("seed", c.seed);
    v("jitter", c.jitter);
}

template <class V>
void fields(V& v, session::PhaseProfiles& p) {
    v("baseline", p.baseline);
    v("free_play", p.free_play);
    v("low", p.low);
    v("high", p.high);
}

struct DifficultyPair {
    sim::DifficultyParams low, high;
};

template <class V>
void fields(V& v, DifficultyPair& d) {
    v("low", d.low);
    v("high", d.high);
}

/// The "session" object; seed, sim constants and features live at the top level.
struct SessionSection {
    session::SessionPlan* plan;
};

template <class V>
void fields(V& v, SessionSection& s) {
    auto& p = *s.plan;
    DifficultyPair d{p.low_difficulty, p.high_difficulty};
    v("baseline_s", p.baseline_s);
    v("interrun_s", p.interrun_s);
    v("run_timeout_s", p.run_timeout_s);
    v("run_order", p.run_order);
    v("profiles", p.profiles);
    v("policy", p.policy);
    v("tlx", p.tlx);
    v("difficulty", d);
    p.low_difficulty = d.low;
    p.high_difficulty = d.high;
    p.low_difficulty.level = sim::Level::Low;
    p.high_difficulty.level = sim::Level::High;
}

template <class V>
void fields(V& v, session::SessionPlan& p) {
    SessionSection s{&p};
    v("seed", p.seed);
    v("session", s);
    v("sim", p.constants);
    v("features", p.features);
}

// ---------------------------------------------------------------------------
// Reading

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(where() + " must be an object");
    }

    template <class T>
    void operator()(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        read(*it, out, path_.empty() ? std::string(key) : path_ + "." + key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k)) fail("unknown key '" + (path_.empty() ? k : path_ + "." + k) + "'");
    }

    template <class T>
    static void read(const json& j, T& out, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) fail(path + " must be a boolean");
            out = j.get<bool>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!j.is_number_unsigned()) fail(path + " must be a non-negative integer");
            out = j.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) fail(path + " must be an integer");
            out = j.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) fail(path + " must be a number");
            out = j.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) fail(path + " must be a string");
            out = j.get<std::string>();
        } else if constexpr (std::is_same_v<T, sim::Level>) {
            if (!j.is_string()) fail(path + " must be \"low\" or \"high\"");
            out = sim::parse_level(j.get<std::string>());
        } else if constexpr (std::is_same_v<T, synth::GazeKind>) {
            if (!j.is_string()) fail(path + " must be a gaze event kind");
            try {
                out = synth::parse_gaze_kind(j.get<std::string>());
            } catch (const Error& e) {
                fail(path + ": " + e.what());
            }
        } else if constexpr (std::is_same_v<T, sim::Vec2>) {
            if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(path + " must be [x, y]");
            out = {j[0].get<double>(), j[1].get<double>()};
        } else if constexpr (requires { typename T::value_type; out.push_back(std::declval<typename T::value_type>()); }) {
            if (!j.is_array()) fail(path + " must be an array");
            T v;
            for (std::size_t i = 0; i < j.size(); ++i) {
                typename T::value_type x{};
                read(j[i], x, path + "[" + std::to_string(i) + "]");
                v.push_back(std::move(x));
            }
            out = std::move(v);
        } else {
            Reader r(j, path);
            fields(r, out);
            r.finish();
        }
    }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

// ---------------------------------------------------------------------------
// Writing

class Writer {
public:
    explicit Writer(json& j) : j_(j) {}

    template <class T>
    void operator()(const char* key, T& v) {
        j_[key] = write(v);
    }

    template <class T>
    static json write(T& v) {
        if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_same_v<T, sim::Level>) return std::string(to_string(v));
        else if constexpr (std::is_same_v<T, synth::GazeKind>) return std::string(synth::to_string(v));
        else if constexpr (std::is_same_v<T, sim::Vec2>) return json::array({v.x, v.y});
        else if constexpr (requires { typename T::value_type; v.begin(); }) {
            json a = json::array();
            for (auto& x : v) a.push_back(write(x));
            return a;
        } else {
            json o = json::object();
            Writer w(o);
            fields(w, v);
            return o;
        }
    }

private:
    json& j_;
};

template <class T>
[[nodiscard]] json to_json(T value) {
    return Writer::write(value);
}

template <class T>
[[nodiscard]] T from_json(const json& j, T defaults = {}) {
    Reader::read(j, defaults, "");
    return defaults;
}

[[nodiscard]] inline json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        fail("'" + path + "' is not valid JSON: " + e.what());
    }
}

/// Seed override from the MWPIPE_SEED environment variable.
[[nodiscard]] inline std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("MWPIPE_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != std::string_view(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        fail(std::string("MWPIPE_SEED must be a non-negative integer, got '") + s + "'");
    }
}

[[nodiscard]] inline session::SessionPlan load_plan(const std::string& path) {
    auto plan = from_json<session::SessionPlan>(parse_file(path));
    if (const auto s = env_seed()) plan.seed = *s;
    return plan;
}

[[nodiscard]] inline synth::SynthProfile load_profile(const std::string& path) {
    auto p = from_json<synth::SynthProfile>(parse_file(path));
    if (const auto s = env_seed()) p.seed = *s;
    return p;
}

} // namespace mwpipe::config
