#pragma once

// Topic names, rates and schemas shared by the generators, the feature engine,
// the session runner and the bag tools.

#include "mwpipe/bus.hpp"
#include "mwpipe/features/window.hpp"
#include "mwpipe/synth.hpp"

#include <string>

namespace mwpipe::topics {

inline constexpr std::string_view kMeta = "sim.meta";
inline constexpr std::string_view kTlx = "session.tlx";

[[nodiscard]] inline Rate raw_rate(features::Modality m, double resp_fs_hz = 1.008) {
    using features::Modality;
    switch (m) {
    case Modality::Ecg: return synth::kEcgRate;
    case Modality::Ppg: return synth::kPpgRate;
    case Modality::Resp: return synth::resp_rate_for(resp_fs_hz);
    case Modality::Eda: return synth::kEdaRate;
    case Modality::St: return synth::kStRate;
    case Modality::Gaze: return synth::kGazeRate;
    }
    return Rate::aperiodic();
}

[[nodiscard]] inline SchemaPtr raw_schema(features::Modality m) {
    static const SchemaPtr scalar = make_schema("bio.scalar", {{"v", FieldType::Float}});
    static const SchemaPtr gaze =
        make_schema("bio.gaze", {{"x_deg", FieldType::Float}, {"y_deg", FieldType::Float}, {"diameter_mm", FieldType::Float}});
    return m == features::Modality::Gaze ? gaze : scalar;
}

[[nodiscard]] inline SchemaPtr feature_schema(features::Modality m) {
    std::vector<FieldSpec> fields{{"quality", FieldType::Float}};
    for (const auto name : features::catalog(m)) fields.push_back({std::string(name), FieldType::Float, true});
    return make_schema(features::feature_topic(m), std::move(fields));
}

/// Phase marker: phase is "baseline", "run", "free_play" or "end"; run_index is 1-based
/// during runs and 0 elsewhere; difficulty is "low", "high" or "none".
[[nodiscard]] inline SchemaPtr meta_schema() {
    static const SchemaPtr s = make_schema("sim.meta", {{"phase", FieldType::String},
                                                        {"run_index", FieldType::Int},
                                                        {"difficulty", FieldType::String},
                                                        {"elapsed_s", FieldType::Float},
                                                        {"session_elapsed_s", FieldType::Float}});
    return s;
}

[[nodiscard]] inline TopicDescriptor raw_descriptor(features::Modality m, double resp_fs_hz = 1.008) {
    return {features::raw_topic(m), raw_schema(m), raw_rate(m, resp_fs_hz)};
}

} // namespace mwpipe::topics
