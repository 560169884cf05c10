#include <catch_amalgamated.hpp>

#include "mwpipe/sim/run.hpp"

#include <set>

using namespace mwpipe;
using namespace mwpipe::sim;

namespace {

RunSetup flat_setup(const DifficultyParams& d = DifficultyParams::low()) {
    auto setup = init_run(1, d).first;
    setup.terrain = Terrain(1, 0.0, 0.0);
    return setup;
}

RunOptions options_for(Level l) {
    RunOptions o;
    o.breath_rate_bpm = l == Level::Low ? 14.0 : 18.0;
    return o;
}

} // namespace

TEST_CASE("difficulty levels") {
    CHECK(tightens(DifficultyParams::low(), DifficultyParams::high()));
    CHECK_FALSE(tightens(DifficultyParams::high(), DifficultyParams::low()));
    CHECK(parse_level("high") == Level::High);
    CHECK_THROWS_AS(parse_level("medium"), Error);
    auto bad = DifficultyParams::low();
    bad.comm_mean_interval_s = 0.0;
    CHECK_THROWS_AS(init_run(1, bad), Error);
}

TEST_CASE("init_run is deterministic and places rover and goal apart on the map") {
    const auto a = init_run(42, DifficultyParams::low());
    const auto b = init_run(42, DifficultyParams::low());
    CHECK(a.second == b.second);
    CHECK(a.first.goal == b.first.goal);
    CHECK(a.second.radar_state == 11);
    CHECK(a.second.battery_pct == 100.0);
    CHECK(a.second.o2_pct == 100.0);
    CHECK(a.second.co2_pct == 0.0);
    CHECK(a.second.motor_temp_c == 50.0);

    std::set<std::pair<double, double>> distinct;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto [setup, s] = init_run(seed, DifficultyParams::high());
        CHECK(distance(s.pos, setup.goal) >= 300.0);
        for (const Vec2 p : {s.pos, setup.goal}) {
            CHECK(p.x >= 0.0);
            CHECK(p.x <= 1000.0);
            CHECK(p.y >= 0.0);
            CHECK(p.y <= 1000.0);
        }
        distinct.insert({s.pos.x, s.pos.y});
    }
    CHECK(distinct.size() == 1000);
}

TEST_CASE("idle motor cools toward ambient and the rover stays put") {
    const auto r = flat_setup();
    RoverState s = init_run(1, DifficultyParams::low()).second;
    s.motor_temp_c = 60.0;
    const auto n = step_dynamics(s, {}, 15.0, r);
    CHECK(n.speed_m_s == 0.0);
    CHECK(n.motor_temp_c == Catch::Approx(60.0 - 0.1 * 0.02 * 10.0));
    CHECK(n.pos == s.pos);
    auto m = s;
    for (int i = 0; i < 3000; ++i) m = step_dynamics(m, {}, 15.0, r);
    CHECK(m.motor_temp_c == Catch::Approx(50.0).margin(0.1));
    CHECK(m.motor_temp_c > 50.0);
}

TEST_CASE("full throttle on flat ground runs at v_max with the stated drains") {
    const auto r = flat_setup();
    RoverState s = init_run(1, DifficultyParams::low()).second;
    OperatorAction a;
    a.throttle = 1.0;
    const auto n = step_dynamics(s, a, 15.0, r);
    CHECK(n.speed_m_s == Catch::Approx(3.0));
    CHECK(n.torque == Catch::Approx(1.0));
    CHECK(n.motor_temp_c == Catch::Approx(50.0 + 0.1 * 1.2));
    CHECK(n.battery_pct == Catch::Approx(100.0 - 0.1 * (0.015 * 3.0 + 0.03 * 1.0)));
    CHECK(n.o2_pct == Catch::Approx(100.0 - 0.1 * 15.0 * 100.0 / (2700.0 * 15.0)));
    CHECK(n.co2_pct == Catch::Approx(0.1 * 15.0 * 80.0 / (90.0 * 15.0)));
    CHECK(n.distance_traveled_m == Catch::Approx(0.3));

    a.overdrive = true;
    const auto o = step_dynamics(s, a, 15.0, r);
    CHECK(o.speed_m_s == Catch::Approx(4.5));
    CHECK(o.torque == Catch::Approx(1.6));
    CHECK(o.overdrive_remaining_s == Catch::Approx(9.9));
    CHECK(o.battery_pct < n.battery_pct - 4.9);
}

TEST_CASE("venting resets CO2") {
    const auto r = flat_setup();
    RoverState s = init_run(1, DifficultyParams::low()).second;
    s.co2_pct = 40.0;
    OperatorAction a;
    a.vent_co2 = true;
    CHECK(step_dynamics(s, a, 15.0, r).co2_pct == 0.0);
}

TEST_CASE("stall latches at 140 C and releases at 90 C") {
    const auto r = flat_setup();
    RoverState s = init_run(1, DifficultyParams::low()).second;
    s.motor_temp_c = 140.1;
    OperatorAction a;
    a.throttle = 1.0;
    s = step_dynamics(s, a, 15.0, r);
    REQUIRE(s.motor_temp_c >= 140.0);
    CHECK(s.stalled);
    CHECK(s.speed_m_s == 0.0);
    int ticks = 0;
    while (s.stalled) {
        const double before = s.motor_temp_c;
        s = step_dynamics(s, a, 15.0, r);
        ++ticks;
        if (s.stalled) {
            CHECK(s.speed_m_s == 0.0);
            CHECK(s.motor_temp_c > 90.0);
        }
        CHECK(s.motor_temp_c < before);
        REQUIRE(ticks < 100000);
    }
    CHECK(s.motor_temp_c <= 90.0);
    CHECK(s.speed_m_s > 0.0);
    // 140 -> 90 with a 50 s cooling constant: ln(90/40) * 50 s
    CHECK(ticks * 0.1 == Catch::Approx(50.0 * std::log(90.0 / 40.0)).margin(0.5));
}

TEST_CASE("radar state mapping") {
    CHECK(radar_state_for(0.0) == 11);
    CHECK(radar_state_for(180.0) == 0);
    CHECK(radar_state_for(16.0) == 10);
    CHECK(radar_state_for(14.999) == 11);
    CHECK(radar_state_for(15.0) == 10);
    CHECK(radar_state_for(-16.0) == 10);
    std::set<int> states;
    for (double e = 0.0; e <= 180.0; e += 0.25) states.insert(radar_state_for(e));
    CHECK(states.size() == 12);
    CHECK(*states.begin() == 0);
    CHECK(*states.rbegin() == 11);
}

TEST_CASE("dish drifts, slews on command and flashes at a doubling rate") {
    auto r = flat_setup(DifficultyParams::high());
    RoverState s = init_run(1, DifficultyParams::high()).second;
    const auto d = update_radar(s, {}, r);
    CHECK(d.radar_error_deg == Catch::Approx(0.15).margin(1e-9));

    OperatorAction rot;
    rot.rotate_dish = static_cast<int>(r.dish_drift_sign);
    auto m = s;
    std::set<int> seen{m.radar_state};
    std::vector<double> rates;
    for (int i = 0; i < 600; ++i) {
        m = update_radar(m, rot, r);
        seen.insert(m.radar_state);
        if (m.radar_state < 4) rates.push_back(m.flash_hz);
    }
    // Error grows at 21.5 deg/s, reaching 180 after about 8.4 s and then shrinking again.
    CHECK(seen.size() == 12);
    REQUIRE_FALSE(rates.empty());
    CHECK(rates.front() == 1.0);

    // Hold the error in the flashing band: the rate doubles every 10 s.
    RoverState f = s;
    f.dish_offset_deg += 170.0;
    r.difficulty.radar_decay_deg_per_s = 0.0;
    f = update_radar(f, {}, r);
    REQUIRE(f.radar_state < 4);
    CHECK(f.flash_hz == 1.0);
    std::vector<double> hz{f.flash_hz};
    for (int i = 1; i <= 300; ++i) {
        f = update_radar(f, {}, r);
        if (i % 100 == 0) hz.push_back(f.flash_hz);
    }
    CHECK(hz == std::vector<double>{1.0, 2.0, 4.0, 8.0});
}

TEST_CASE("comms: answer latency and re-prompt halving") {
    auto [r, s] = init_run(5, DifficultyParams::low());
    s.next_prompt_tick = 10;
    OperatorAction none;
    while (!s.pending_prompt) s = step(s, none, 15.0, r);
    CHECK(s.comm_request);
    const auto issued = s.pending_prompt->issued_tick;
    CHECK(issued == 10);

    SECTION("answered after 1.5 s") {
        for (int i = 0; i < 14; ++i) s = step(s, none, 15.0, r);
        OperatorAction answer;
        if (s.pending_prompt->kind == PromptKind::Switch) answer.switch_channel = s.pending_prompt->target;
        else answer.acknowledge = true;
        s = step(s, answer, 15.0, r);
        CHECK(s.comm_response);
        REQUIRE(s.comm_latency_s);
        CHECK(*s.comm_latency_s == Catch::Approx(1.5));
        CHECK_FALSE(s.pending_prompt);
        CHECK(s.next_prompt_tick > s.tick);
    }
    SECTION("unanswered: gaps 16, 8, 4 then floor 2") {
        std::vector<std::uint64_t> issues{issued};
        while (issues.size() < 6) {
            s = step(s, none, 15.0, r);
            if (s.comm_request) issues.push_back(s.tick);
        }
        std::vector<double> gaps;
        for (std::size_t i = 1; i < issues.size(); ++i) gaps.push_back(static_cast<double>(issues[i] - issues[i - 1]) * 0.1);
        CHECK(gaps == std::vector<double>{16.0, 8.0, 4.0, 2.0, 2.0});
        CHECK(s.pending_prompt->reprompt_count == 5);
    }
    SECTION("a wrong answer leaves the prompt pending") {
        OperatorAction wrong;
        if (s.pending_prompt->kind == PromptKind::Switch) wrong.acknowledge = true;
        else wrong.switch_channel = other(s.comm_channel);
        s = step(s, wrong, 15.0, r);
        CHECK(s.pending_prompt);
        CHECK_FALSE(s.comm_response);
    }
}

TEST_CASE("about one prompt in five is a report-in") {
    auto r = flat_setup();
    int report = 0, total = 0;
    for (std::uint32_t i = 0; i < 5000; ++i) {
        ++total;
        if (sim::detail::hash_uniform(r.seed, 202, i) < 0.2) ++report;
    }
    CHECK(static_cast<double>(report) / total == Catch::Approx(0.2).margin(0.02));
}

TEST_CASE("evaluate_run applies the terminal rules") {
    auto tr = simulate_run(3, DifficultyParams::low(), PolicyConfig{});
    auto base = tr;
    base.ticks.resize(1);
    base.actions.clear();

    SECTION("empty and irregular traces are rejected") {
        RunTrace empty = base;
        empty.ticks.clear();
        CHECK_THROWS_AS(evaluate_run(empty), Error);
        auto gap = tr;
        gap.ticks.erase(gap.ticks.begin() + 5);
        try {
            (void)evaluate_run(gap);
            FAIL("expected IncompleteTrace");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::IncompleteTrace);
        }
    }
    SECTION("battery hits 0") {
        auto t = tr;
        t.ticks.resize(50);
        t.ticks[30].battery_pct = 0.0;
        CHECK(evaluate_run(t).status == RunStatus::FailedBattery);
    }
    SECTION("marker 8 m from goal completes, 12 m does not") {
        auto t = tr;
        t.ticks.resize(50);
        t.ticks[40].marker_dropped = true;
        t.ticks[40].marker_pos = {t.setup.goal.x + 8.0, t.setup.goal.y};
        const auto o = evaluate_run(t);
        CHECK(o.status == RunStatus::Completed);
        REQUIRE(o.completion_time_s);
        CHECK(*o.completion_time_s == Catch::Approx(4.0));
        t.ticks[40].marker_pos = {t.setup.goal.x + 12.0, t.setup.goal.y};
        CHECK(evaluate_run(t).status == RunStatus::Aborted);
    }
    SECTION("oxygen and CO2") {
        auto t = tr;
        t.ticks.resize(50);
        t.ticks[20].co2_pct = 100.0;
        t.ticks[30].o2_pct = 0.0;
        CHECK(evaluate_run(t).status == RunStatus::FailedCo2);
    }
}

TEST_CASE("closed loop: a prompt operator completes every low-difficulty run") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        const auto tr = simulate_run(seed, DifficultyParams::low(), PolicyConfig{}, options_for(Level::Low));
        const auto o = evaluate_run(tr);
        CHECK(o.status == RunStatus::Completed);
        CHECK(distance(tr.ticks.back().pos, tr.setup.goal) <= 10.0);
        CHECK(tr.ticks.back().marker_dropped);
        CHECK(o.alert(Subsystem::Comms).misses == 0);
        CHECK(o.alert(Subsystem::Co2).misses == 0);
        if (o.duration_s > 120.0) CHECK(o.vent_count >= 1);
    }
}

TEST_CASE("closed loop: an unresponsive operator fails on resources") {
    for (const auto level : {Level::Low, Level::High}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto o = evaluate_run(simulate_run(seed, DifficultyParams::for_level(level), PolicyConfig::unresponsive()));
            CHECK(is_failure(o.status));
        }
    }
}

TEST_CASE("closed loop: determinism and per-tick invariants") {
    PolicyConfig p;
    p.latency_mean_s = 2.0;
    p.latency_sd_s = 1.0;
    p.error_rate = 0.2;
    p.seed = 9;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto level = seed % 2 ? Level::High : Level::Low;
        const auto a = simulate_run(seed, DifficultyParams::for_level(level), p, options_for(level));
        const auto b = simulate_run(seed, DifficultyParams::for_level(level), p, options_for(level));
        REQUIRE(a.ticks == b.ticks);
        REQUIRE(a.actions == b.actions);
        for (std::size_t i = 0; i < a.ticks.size(); ++i) {
            const auto& s = a.ticks[i];
            CHECK((s.radar_state >= 0 && s.radar_state <= 11));
            CHECK((s.battery_pct >= 0.0 && s.battery_pct <= 100.0));
            CHECK((s.motor_temp_c >= 20.0 && s.motor_temp_c <= 200.0));
            CHECK((s.pos.x >= 0.0 && s.pos.x <= 1000.0 && s.pos.y >= 0.0 && s.pos.y <= 1000.0));
            if (s.stalled) CHECK(s.speed_m_s == 0.0);
            if (i == 0) continue;
            const auto& q = a.ticks[i - 1];
            CHECK(s.o2_pct <= q.o2_pct);
            CHECK(s.battery_pct <= q.battery_pct);
            CHECK(s.distance_traveled_m >= q.distance_traveled_m);
            if (s.co2_pct < q.co2_pct) CHECK(s.vented);
            CHECK(s.t.nanos - q.t.nanos == 100'000'000ULL);
        }
    }
}

TEST_CASE("an overdriving operator who ignores heat stalls the rover") {
    PolicyConfig p;
    p.throttle_backoff_c = p.throttle_cutoff_c = 1000.0;
    p.overdrive_max_temp_c = 1000.0;
    p.overdrive_min_distance_m = 0.0;
    p.overdrive_min_battery = 0.0;
    std::uint32_t stalls = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto tr = simulate_run(seed, DifficultyParams::high(), p, options_for(Level::High));
        const auto o = evaluate_run(tr);
        stalls += o.stall_count;
        for (std::size_t i = 1; i < tr.ticks.size(); ++i) {
            const auto& s = tr.ticks[i];
            const auto& q = tr.ticks[i - 1];
            if (s.motor_temp_c >= 140.0) CHECK(s.stalled);
            if (q.stalled && !s.stalled) CHECK(s.motor_temp_c <= 90.0);
        }
    }
    CHECK(stalls > 0);
}

TEST_CASE("high difficulty dominates low over 30 seeds") {
    double prompts[2]{}, temp[2]{}, drain[2]{};
    for (const auto level : {Level::Low, Level::High}) {
        const auto i = static_cast<std::size_t>(level);
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto o = evaluate_run(simulate_run(seed, DifficultyParams::for_level(level), PolicyConfig{}, options_for(level)));
            prompts[i] += o.prompt_count;
            temp[i] += o.mean_motor_temp_c;
            drain[i] += o.battery_used_pct;
        }
    }
    CHECK(prompts[1] > prompts[0]);
    CHECK(temp[1] > temp[0]);
    CHECK(drain[1] > drain[0]);
}

TEST_CASE("telemetry payloads match their schemas") {
    const auto tr = simulate_run(2, DifficultyParams::high(), PolicyConfig{});
    for (const auto which : {Telemetry::Rover, Telemetry::Resources, Telemetry::Radar, Telemetry::Comms}) {
        const auto schema = telemetry_schema(which);
        CHECK(schema->id == kTelemetryTopics[static_cast<std::size_t>(which)]);
        for (const auto& s : tr.ticks) {
            const auto v = telemetry_values(which, s, tr.setup, true);
            REQUIRE(v.size() == schema->fields.size());
            CHECK_NOTHROW(Payload(schema, v).validate());
        }
    }
}
