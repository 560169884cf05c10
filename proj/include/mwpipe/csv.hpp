#pragma once

// Feature table export: recomputes windowed features from a bag's raw streams and
// joins each row with the nearest telemetry and phase marker samples.

#include "mwpipe/bag.hpp"
#include "mwpipe/features/engine.hpp"
#include "mwpipe/topics.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace mwpipe::csv {

struct ExtractOptions {
    features::FeatureConfig features;
    std::uint64_t align_tolerance_ns = kDefaultAlignToleranceNs;
};

struct FeatureTable {
    std::vector<std::string> columns; // "t_end" first, the rest in lexicographic order
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> warnings;

    [[nodiscard]] std::string to_string() const;
};

/// Shortest decimal that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

[[nodiscard]] inline std::string format_cell(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) return {};
            else if constexpr (std::is_same_v<T, double>) return format_double(x);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
            else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::string>) return x;
            else {
                std::string out;
                for (std::size_t i = 0; i < x.size(); ++i) out += (i ? ";" : "") + format_double(x[i]);
                return out;
            }
        },
        v);
}

[[nodiscard]] inline std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (const char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

inline std::string FeatureTable::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + quote_if_needed(columns[i]);
    out += '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + quote_if_needed(r[i]);
        out += '\n';
    }
    return out;
}

namespace detail {

// "sim.meta" becomes the "meta." namespace; other telemetry keeps its topic name.
[[nodiscard]] inline std::string column_prefix(std::string_view topic) {
    if (topic == topics::kMeta) return "meta.";
    return std::string(topic) + ".";
}

} // namespace detail

[[nodiscard]] inline FeatureTable extract_table(const std::string& bag_path, const ExtractOptions& opt = {}) {
    bag::BagReader reader(bag_path);
    const auto& manifest = reader.manifest();

    features::FeatureProcessor proc(opt.features);
    std::vector<features::Modality> present;
    StreamSet telemetry;
    std::map<std::string, SchemaPtr> telemetry_schemas;
    for (const auto& d : manifest.topics) {
        if (d.name.starts_with("bio.")) {
            if (const auto m = features::parse_modality(d.name.substr(4))) {
                proc.add_stream(*m, d.rate);
                present.push_back(*m);
            }
        } else if (d.name.starts_with("sim.")) {
            telemetry[d.name];
            telemetry_schemas[d.name] = d.schema;
        }
    }

    std::map<Timestamp, std::map<features::Modality, features::FeatureRow>> by_end;
    auto take = [&](std::vector<features::FeatureRow>&& rows) {
        for (auto& r : rows) by_end[r.t_end].insert_or_assign(r.modality, std::move(r));
    };
    while (auto s = reader.next()) {
        if (s->topic.starts_with("sim.")) telemetry[s->topic].push_back(*s);
        if (s->topic.starts_with("bio.") || s->topic == topics::kMeta) take(proc.feed(*s));
    }
    take(proc.finish());

    FeatureTable table;
    table.warnings = reader.warnings();

    // Column name -> (source, index) where source is a modality or a telemetry topic.
    struct Source {
        std::optional<features::Modality> modality;
        std::string topic;
        std::optional<std::size_t> index; // catalog/field index; empty for quality
    };
    std::map<std::string, Source> cols;
    for (const auto m : present) {
        const std::string p = std::string(features::to_string(m)) + ".";
        cols[p + "quality"] = {m, {}, std::nullopt};
        const auto cat = features::catalog(m);
        for (std::size_t i = 0; i < cat.size(); ++i) cols[p + std::string(cat[i])] = {m, {}, i};
    }
    for (const auto& [topic, schema] : telemetry_schemas)
        for (std::size_t i = 0; i < schema->fields.size(); ++i)
            cols[detail::column_prefix(topic) + schema->fields[i].name] = {std::nullopt, topic, i};

    table.columns.push_back("t_end");
    for (const auto& [name, src] : cols) table.columns.push_back(name);

    std::vector<Timestamp> anchors;
    anchors.reserve(by_end.size());
    for (const auto& [t, rows] : by_end) anchors.push_back(t);
    std::set<std::string> others;
    for (const auto& [topic, stream] : telemetry) others.insert(topic);
    const auto frames = others.empty() ? std::vector<AlignedFrame>{} : align_at("features", anchors, telemetry, others, opt.align_tolerance_ns);

    std::size_t k = 0;
    for (const auto& [t, rows] : by_end) {
        std::vector<std::string> line;
        line.reserve(table.columns.size());
        line.push_back(std::to_string(t.nanos));
        for (const auto& [name, src] : cols) {
            if (src.modality) {
                const auto it = rows.find(*src.modality);
                if (it == rows.end()) line.emplace_back();
                else if (!src.index) line.push_back(format_double(it->second.quality));
                else if (const auto v = it->second.values[*src.index]) line.push_back(format_double(*v));
                else line.emplace_back();
            } else {
                const auto& joined = frames[k].joined;
                const auto it = joined.find(src.topic);
                line.push_back(it == joined.end() ? std::string{} : format_cell(it->second.sample.payload->values()[*src.index]));
            }
        }
        table.rows.push_back(std::move(line));
        ++k;
    }
    return table;
}

inline FeatureTable extract_csv(const std::string& bag_path, const std::string& out_path, const ExtractOptions& opt = {}) {
    auto table = extract_table(bag_path, opt);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open '" + out_path + "' for writing");
    out << table.to_string();
    if (!out.flush()) throw Error(ErrorCode::IoError, "write to '" + out_path + "' failed");
    return table;
}

} // namespace mwpipe::csv
