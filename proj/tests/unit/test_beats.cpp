#include <catch_amalgamated.hpp>

#include "mwpipe/features/beats.hpp"
#include "mwpipe/synth.hpp"

#include <cmath>

using namespace mwpipe;
using namespace mwpipe::features;

namespace {

struct Series {
    std::vector<double> x, t;
};

Series to_series(const synth::Waveform& w) {
    Series s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        s.x.push_back(w.values[i]);
        s.t.push_back(w.time(i).seconds());
    }
    return s;
}

synth::SynthProfile constant_rr(double rr_ms, double seconds) {
    synth::SynthProfile p;
    p.rr_mean_ms = rr_ms;
    p.duration_s = seconds;
    return p;
}

} // namespace

TEST_CASE("ECG beats at constant RR are recovered to one sample") {
    const auto p = constant_rr(800, 30);
    const auto rr = synth::gen_rr_series(p);
    const auto w = synth::render_cardiac(rr, synth::CardiacModality::Ecg, Timestamp{0}, Timestamp::from_seconds(30), p);
    const auto s = to_series(w);
    const auto b = detect_ecg_beats(s.x, s.t, 252.0);
    CHECK((b.beat_times_s.size() == 37 || b.beat_times_s.size() == 38));
    REQUIRE(b.intervals_ms.size() + 1 == b.beat_times_s.size());
    for (const double v : b.intervals_ms) CHECK(std::abs(v - 800.0) <= 1000.0 / 252.0);
    const auto truth = rr.beat_times_s();
    for (const double bt : b.beat_times_s) {
        const auto it = std::min_element(truth.begin(), truth.end(), [&](double a, double c) { return std::abs(a - bt) < std::abs(c - bt); });
        CHECK(std::abs(*it - bt) <= 0.004);
    }
}

TEST_CASE("single ECG beat has one QRS maximum near the beat time") {
    const auto p = constant_rr(800, 0.8);
    const auto rr = synth::gen_rr_series(p);
    REQUIRE(rr.intervals_ms.size() == 1);
    const auto w = synth::render_cardiac(rr, synth::CardiacModality::Ecg, Timestamp{0}, Timestamp::from_seconds(1.5), p);
    const auto it = std::max_element(w.values.begin(), w.values.end());
    const double t = w.time(static_cast<std::size_t>(it - w.values.begin())).seconds();
    CHECK(std::abs(t - rr.t0.seconds()) <= 0.004);
}

TEST_CASE("ECG amplitude stays within the plotted range") {
    synth::SynthProfile p = constant_rr(600, 20);
    p.rr_sdnn_ms = 40;
    p.ecg_noise = 0.05;
    const auto rr = synth::gen_rr_series(p);
    const auto w = synth::render_cardiac(rr, synth::CardiacModality::Ecg, Timestamp{0}, Timestamp::from_seconds(20), p);
    for (const double v : w.values) {
        CHECK(v >= -0.5);
        CHECK(v <= 1.5);
    }
}

TEST_CASE("flatline has no beats") {
    std::vector<double> x(252 * 10, 0.3), t(x.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / 252.0;
    CHECK(detect_ecg_beats(x, t, 252.0).beat_times_s.empty());
    std::vector<double> y(64 * 10, -1.0), ty(y.size());
    for (std::size_t i = 0; i < ty.size(); ++i) ty[i] = static_cast<double>(i) / 64.0;
    CHECK(detect_ppg_beats(y, ty, 64.0).beat_times_s.empty());
}

TEST_CASE("PPG at RR 1000 ms renders 30 pulses and detects the rate") {
    const auto p = constant_rr(1000, 30);
    const auto rr = synth::gen_rr_series(p);
    CHECK(rr.intervals_ms.size() == 30);
    const auto w = synth::render_cardiac(rr, synth::CardiacModality::Ppg, Timestamp{0}, Timestamp::from_seconds(30), p);
    CHECK(w.size() == 64 * 30);
    const auto s = to_series(w);
    const auto b = detect_ppg_beats(s.x, s.t, 64.0);
    REQUIRE(b.intervals_ms.size() >= 25);
    CHECK(std::abs(dsp::mean(b.intervals_ms) - 1000.0) <= 16.0);
    for (const double v : b.intervals_ms) CHECK(std::abs(v - 1000.0) <= 16.0);
}

TEST_CASE("RR series properties") {
    auto p = constant_rr(800, 60);
    auto rr = synth::gen_rr_series(p);
    for (const double v : rr.intervals_ms) CHECK(v == 800.0);
    const auto times = rr.beat_times_s();
    CHECK(times.back() >= 60.0);

    p.rr_sdnn_ms = 50;
    p.duration_s = 600;
    p.seed = 99;
    rr = synth::gen_rr_series(p);
    CHECK(rr.intervals_ms == synth::gen_rr_series(p).intervals_ms);
    const double n = static_cast<double>(rr.intervals_ms.size());
    CHECK(std::abs(dsp::mean(rr.intervals_ms) - 800.0) <= 3.0 * 50.0 / std::sqrt(n));
    for (const double v : rr.intervals_ms) {
        CHECK(v > 200.0);
        CHECK(v < 3000.0);
    }
    p.rr_mean_ms = 0;
    CHECK_THROWS_AS(synth::gen_rr_series(p), Error);
    CHECK_THROWS_AS(synth::render_cardiac(synth::RRSeries{}, synth::CardiacModality::Ecg, Timestamp{0}, Timestamp{1}, p), Error);
}
