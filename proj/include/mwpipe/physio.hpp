#pragma once

// All six raw biosignals for one profile over one time span, ready for the bus.

#include "mwpipe/publish.hpp"
#include "mwpipe/synth.hpp"
#include "mwpipe/topics.hpp"

#include <array>

namespace mwpipe {

struct PhysioStreams {
    synth::RRSeries rr;
    std::array<synth::Waveform, 5> scalar; // ecg, ppg, resp, eda, st
    synth::GazeTrace gaze;
};

using PhysioHandles = std::array<TopicHandle, features::kAllModalities.size()>;

/// Renders [start, end) on the global sample grids. The profile's duration_s is
/// replaced by the span length.
[[nodiscard]] inline PhysioStreams render_physio(synth::SynthProfile p, Timestamp start, Timestamp end) {
    p.duration_s = static_cast<double>(diff_ns(end, start)) / 1e9;
    synth::validate(p);
    PhysioStreams s;
    s.rr = synth::gen_rr_series(p, start);
    s.scalar[0] = synth::render_cardiac(s.rr, synth::CardiacModality::Ecg, start, end, p);
    s.scalar[1] = synth::render_cardiac(s.rr, synth::CardiacModality::Ppg, start, end, p);
    s.scalar[2] = synth::gen_resp(p.resp_rate_bpm, p.resp_fs_hz, start, end);
    s.scalar[3] = synth::gen_eda(p, start, end);
    s.scalar[4] = synth::gen_drift_st(p, start, end);
    s.gaze = synth::gen_gaze(p, start, end);
    return s;
}

inline PhysioHandles open_physio_topics(Bus& bus, double resp_fs_hz = 1.008) {
    PhysioHandles h;
    for (const auto m : features::kAllModalities) h[static_cast<std::size_t>(m)] = bus.open_topic(topics::raw_descriptor(m, resp_fs_hz));
    return h;
}

/// Streams referencing `s`, which must outlive them.
[[nodiscard]] inline std::vector<PendingStream> pending_physio(const PhysioStreams& s, const PhysioHandles& h) {
    std::vector<PendingStream> out;
    for (std::size_t k = 0; k < s.scalar.size(); ++k) {
        const auto* w = &s.scalar[k];
        out.push_back({h[k], w->size(), [w](std::size_t i) { return w->time(i); },
                       [w](std::size_t i) { return std::vector<Value>{w->values[i]}; }});
    }
    const auto* g = &s.gaze;
    out.push_back({h[static_cast<std::size_t>(features::Modality::Gaze)], g->size(), [g](std::size_t i) { return g->time(i); },
                   [g](std::size_t i) { return std::vector<Value>{g->x[i], g->y[i], g->d[i]}; }});
    return out;
}

} // namespace mwpipe
