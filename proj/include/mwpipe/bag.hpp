#pragma once

// Bag files: a magic line, one manifest line, then one record per line
//   {"t": <ns>, "topic": "...", "seq": <n>, "data": {field: value, ...}}
// in global (t, topic, seq) order. Writes are flushed per release batch, so a file cut
// short by a crash loses at most a partial last line, which readers skip with a warning.

#include "mwpipe/bus.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace mwpipe::bag {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kMagic = "MWBAG1";

// ---------------------------------------------------------------------------
// JSON mapping

[[nodiscard]] inline json schema_to_json(const Schema& s) {
    json fields = json::array();
    for (const auto& f : s.fields) fields.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"nullable", f.nullable}});
    return {{"id", s.id}, {"fields", std::move(fields)}};
}

[[nodiscard]] inline SchemaPtr schema_from_json(const json& j) {
    Schema s;
    s.id = j.at("id").get<std::string>();
    for (const auto& f : j.at("fields"))
        s.fields.push_back({f.at("name").get<std::string>(), parse_field_type(f.at("type").get<std::string>()), f.value("nullable", false)});
    return std::make_shared<const Schema>(std::move(s));
}

[[nodiscard]] inline json descriptor_to_json(const TopicDescriptor& d) {
    return {{"name", d.name}, {"rate", d.rate.to_string()}, {"schema", schema_to_json(*d.schema)}};
}

[[nodiscard]] inline TopicDescriptor descriptor_from_json(const json& j) {
    return {j.at("name").get<std::string>(), schema_from_json(j.at("schema")), Rate::parse(j.at("rate").get<std::string>())};
}

[[nodiscard]] inline json value_to_json(const Value& v) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
            else return x;
        },
        v);
}

[[nodiscard]] inline Value value_from_json(const json& j, const FieldSpec& f) {
    if (j.is_null()) {
        if (!f.nullable) throw Error(ErrorCode::SchemaMismatch, "field '" + f.name + "' is not nullable");
        return std::monostate{};
    }
    switch (f.type) {
    case FieldType::Float:
        if (!j.is_number()) break;
        return j.get<double>();
    case FieldType::Int:
        if (!j.is_number_integer()) break;
        return j.get<std::int64_t>();
    case FieldType::Bool:
        if (!j.is_boolean()) break;
        return j.get<bool>();
    case FieldType::String:
        if (!j.is_string()) break;
        return j.get<std::string>();
    case FieldType::FloatVec:
        if (!j.is_array()) break;
        return j.get<std::vector<double>>();
    }
    throw Error(ErrorCode::SchemaMismatch, "field '" + f.name + "' has wrong type");
}

[[nodiscard]] inline json payload_to_json(const Payload& p) {
    json data = json::object();
    const auto& fields = p.schema()->fields;
    for (std::size_t i = 0; i < fields.size(); ++i) data[fields[i].name] = value_to_json(p.values()[i]);
    return data;
}

[[nodiscard]] inline Payload payload_from_json(const json& data, const SchemaPtr& schema) {
    if (!data.is_object() || data.size() != schema->fields.size())
        throw Error(ErrorCode::SchemaMismatch, "record data does not match schema '" + schema->id + "'");
    std::vector<Value> values;
    values.reserve(schema->fields.size());
    for (const auto& f : schema->fields) {
        const auto it = data.find(f.name);
        if (it == data.end()) throw Error(ErrorCode::SchemaMismatch, "record is missing field '" + f.name + "'");
        values.push_back(value_from_json(*it, f));
    }
    Payload p(schema, std::move(values));
    p.validate();
    return p;
}

[[nodiscard]] inline std::string record_line(const TimedSample& s) {
    const json j{{"t", s.t.nanos}, {"topic", s.topic}, {"seq", s.seq}, {"data", payload_to_json(*s.payload)}};
    return j.dump();
}

struct Manifest {
    std::uint64_t epoch_unix_ns = 0;
    json session = json::object();
    std::vector<TopicDescriptor> topics;

    [[nodiscard]] json to_json() const {
        json t = json::array();
        for (const auto& d : topics) t.push_back(descriptor_to_json(d));
        return {{"format", kMagic}, {"epoch_unix_ns", epoch_unix_ns}, {"session", session}, {"topics", std::move(t)}};
    }

    [[nodiscard]] static Manifest from_json(const json& j) {
        Manifest m;
        m.epoch_unix_ns = j.value("epoch_unix_ns", std::uint64_t{0});
        m.session = j.value("session", json::object());
        for (const auto& d : j.at("topics")) m.topics.push_back(descriptor_from_json(d));
        return m;
    }

    [[nodiscard]] const TopicDescriptor* find(std::string_view name) const noexcept {
        for (const auto& d : topics)
            if (d.name == name) return &d;
        return nullptr;
    }
};

[[nodiscard]] inline std::uint64_t wall_clock_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

// ---------------------------------------------------------------------------
// Writing

class BagWriter {
public:
    BagWriter(const std::string& path, const Manifest& manifest) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
        out_ << kMagic << '\n' << manifest.to_json().dump() << '\n';
        flush();
    }

    void write(const TimedSample& s) {
        out_ << record_line(s) << '\n';
        ++records_;
    }

    void flush() {
        out_.flush();
        if (!out_) throw Error(ErrorCode::IoError, "write failed");
    }

    [[nodiscard]] std::uint64_t records() const noexcept { return records_; }

private:
    std::ofstream out_;
    std::uint64_t records_ = 0;
};

/// Records every topic open on the bus at construction, in merged order as the
/// watermark advances. Samples still buffered are written when the bus closes.
class BagRecorder {
public:
    BagRecorder(Bus& bus, const std::string& path, json session = json::object(), std::optional<std::uint64_t> epoch_unix_ns = {})
        : writer_(path, make_manifest(bus, std::move(session), epoch_unix_ns)) {
        std::set<std::string> names;
        for (const auto& d : bus.topics()) names.insert(d.name);
        merged_ = bus.subscribe_merged(names);
        merged_->on_release([this](std::vector<TimedSample>&& batch) {
            for (const auto& s : batch) writer_.write(s);
            writer_.flush();
        });
    }

    BagRecorder(const BagRecorder&) = delete;
    BagRecorder& operator=(const BagRecorder&) = delete;

    [[nodiscard]] std::uint64_t records() const noexcept { return writer_.records(); }

private:
    static Manifest make_manifest(const Bus& bus, json session, std::optional<std::uint64_t> epoch) {
        Manifest m;
        m.epoch_unix_ns = epoch ? *epoch : wall_clock_ns();
        m.session = std::move(session);
        m.topics = bus.topics();
        return m;
    }

    BagWriter writer_;
    std::shared_ptr<MergedSubscription> merged_;
};

// ---------------------------------------------------------------------------
// Reading

/// Streaming reader. Throws UnknownMagic for a foreign file and CorruptBag for a bad
/// manifest or a malformed record before the last line.
class BagReader {
public:
    explicit BagReader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
        std::string line;
        if (!std::getline(in_, line) || line != kMagic) throw Error(ErrorCode::UnknownMagic, "'" + path + "' is not a bag file");
        offset_ = line.size() + 1;
        if (!std::getline(in_, line)) throw Error(ErrorCode::CorruptBag, "missing manifest");
        try {
            manifest_ = Manifest::from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::CorruptBag, std::string("bad manifest: ") + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::CorruptBag, std::string("bad manifest: ") + e.what());
        }
        offset_ += line.size() + 1;
        for (const auto& d : manifest_.topics) schemas_.emplace(d.name, d.schema);
    }

    [[nodiscard]] const Manifest& manifest() const noexcept { return manifest_; }
    [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    /// Byte offset of the record most recently returned.
    [[nodiscard]] std::uint64_t record_offset() const noexcept { return record_offset_; }

    std::optional<TimedSample> next() {
        std::string line;
        while (std::getline(in_, line)) {
            record_offset_ = offset_;
            const bool terminated = !in_.eof();
            offset_ += line.size() + (terminated ? 1 : 0);
            if (line.empty() && terminated) continue;
            try {
                return parse_record(line);
            } catch (const std::exception& e) {
                if (!terminated) {
                    warnings_.push_back("skipped truncated final record at byte " + std::to_string(record_offset_));
                    return std::nullopt;
                }
                throw Error(ErrorCode::CorruptBag, "bad record at byte " + std::to_string(record_offset_) + ": " + e.what());
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] TimedSample parse_record(const std::string& line) const {
        const auto j = json::parse(line);
        TimedSample s;
        s.topic = j.at("topic").get<std::string>();
        s.t = Timestamp{j.at("t").get<std::uint64_t>()};
        s.seq = j.at("seq").get<std::uint64_t>();
        const auto it = schemas_.find(s.topic);
        if (it == schemas_.end()) throw Error(ErrorCode::UnknownTopic, "topic '" + s.topic + "' is not in the manifest");
        s.payload = std::make_shared<const Payload>(payload_from_json(j.at("data"), it->second));
        return s;
    }

private:
    std::ifstream in_;
    Manifest manifest_;
    std::map<std::string, SchemaPtr, std::less<>> schemas_;
    std::vector<std::string> warnings_;
    std::uint64_t offset_ = 0;
    std::uint64_t record_offset_ = 0;
};

struct Bag {
    Manifest manifest;
    std::vector<TimedSample> records;
    std::vector<std::string> warnings;
};

[[nodiscard]] inline Bag read_bag(const std::string& path) {
    BagReader r(path);
    Bag b{r.manifest(), {}, {}};
    while (auto s = r.next()) b.records.push_back(std::move(*s));
    b.warnings = r.warnings();
    return b;
}

/// Record lines only, without magic and manifest.
[[nodiscard]] inline std::string read_body(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::string line, body;
    for (int i = 0; i < 2 && std::getline(in, line); ++i) {
    }
    body.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return body;
}

// ---------------------------------------------------------------------------
// Validation

struct BagIssue {
    std::uint64_t offset = 0;
    std::string topic;
    std::string message;
};

struct ValidationReport {
    std::vector<BagIssue> errors;
    std::vector<std::string> warnings;
    std::uint64_t records = 0;
    std::map<std::string, std::uint64_t> counts;

    [[nodiscard]] bool ok() const noexcept { return errors.empty(); }
};

/// Checks magic, manifest, schema conformance, global t order, per-topic seq
/// contiguity and t monotonicity, and gaps longer than twice a periodic topic's period.
/// Never throws on bag content; problems are report entries.
[[nodiscard]] inline ValidationReport validate_bag(const std::string& path) {
    ValidationReport rep;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        rep.errors.push_back({0, "", "cannot open file"});
        return rep;
    }
    std::string line;
    std::uint64_t offset = 0;
    if (!std::getline(in, line) || line != kMagic) {
        rep.errors.push_back({0, "", "bad magic: expected '" + std::string(kMagic) + "'"});
        return rep;
    }
    offset += line.size() + 1;
    Manifest manifest;
    if (!std::getline(in, line)) {
        rep.errors.push_back({offset, "", "missing manifest"});
        return rep;
    }
    try {
        manifest = Manifest::from_json(json::parse(line));
    } catch (const std::exception& e) {
        rep.errors.push_back({offset, "", std::string("bad manifest: ") + e.what()});
        return rep;
    }
    offset += line.size() + 1;

    struct TopicCheck {
        SchemaPtr schema;
        Rate rate;
        std::uint64_t next_seq = 0;
        std::optional<Timestamp> last_t;
    };
    std::map<std::string, TopicCheck, std::less<>> topics;
    for (const auto& d : manifest.topics) {
        if (topics.contains(d.name)) rep.errors.push_back({offset, d.name, "duplicate topic in manifest"});
        topics[d.name] = {d.schema, d.rate, 0, std::nullopt};
    }

    std::optional<Timestamp> last_t;
    while (std::getline(in, line)) {
        const std::uint64_t at = offset;
        const bool terminated = !in.eof();
        offset += line.size() + (terminated ? 1 : 0);
        if (line.empty() && terminated) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            if (!terminated) rep.warnings.push_back("truncated final record at byte " + std::to_string(at));
            else rep.errors.push_back({at, "", "unparseable record"});
            continue;
        }
        if (!j.is_object() || !j.contains("t") || !j["t"].is_number_unsigned() || !j.contains("topic") || !j["topic"].is_string() ||
            !j.contains("seq") || !j["seq"].is_number_unsigned() || !j.contains("data")) {
            rep.errors.push_back({at, "", "record lacks t, topic, seq or data"});
            continue;
        }
        ++rep.records;
        const auto topic = j["topic"].get<std::string>();
        const Timestamp t{j["t"].get<std::uint64_t>()};
        const auto seq = j["seq"].get<std::uint64_t>();
        const auto it = topics.find(topic);
        if (it == topics.end()) {
            rep.errors.push_back({at, topic, "topic not in manifest"});
            continue;
        }
        auto& tc = it->second;
        ++rep.counts[topic];
        if (last_t && t < *last_t)
            rep.errors.push_back({at, topic, "out of order: t=" + std::to_string(t.nanos) + " after t=" + std::to_string(last_t->nanos)});
        last_t = last_t ? std::max(*last_t, t) : t;
        if (seq != tc.next_seq)
            rep.errors.push_back({at, topic, "seq jump: expected " + std::to_string(tc.next_seq) + ", got " + std::to_string(seq)});
        tc.next_seq = seq + 1;
        if (tc.last_t) {
            if (t <= *tc.last_t) rep.errors.push_back({at, topic, "t not increasing within topic"});
            else if (tc.rate.periodic() && t.nanos - tc.last_t->nanos > 2 * tc.rate.period_ceil_ns())
                rep.errors.push_back({at, topic, "gap of " + std::to_string(t.nanos - tc.last_t->nanos) + " ns exceeds twice the period"});
        }
        tc.last_t = tc.last_t ? std::max(*tc.last_t, t) : t;
        try {
            (void)payload_from_json(j["data"], tc.schema);
        } catch (const Error& e) {
            rep.errors.push_back({at, topic, e.what()});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayOptions {
    std::optional<double> rate; // empty: as fast as possible
    std::vector<std::string> exclude_prefixes;
    /// Upper bound for watermark advances, e.g. a feature engine's next emit time.
    std::function<std::optional<Timestamp>()> watermark_cap;
    /// Called once the bag's topics are open and before the first publish, e.g. to
    /// attach a recorder or a feature engine.
    std::function<void(Bus&)> on_ready;
};

struct ReplayStats {
    std::uint64_t published = 0;
    std::uint64_t skipped = 0;
    std::vector<std::string> warnings;
    double wall_s = 0.0;
};

[[nodiscard]] inline bool excluded(std::string_view topic, const std::vector<std::string>& prefixes) noexcept {
    for (const auto& p : prefixes)
        if (topic.starts_with(p)) return true;
    return false;
}

/// Opens the bag's topics on `bus` (minus exclusions) and republishes every record with
/// its original timestamp, paced so that wall-clock gaps are record gaps divided by rate.
inline ReplayStats replay(const std::string& path, Bus& bus, const ReplayOptions& opt = {}) {
    if (opt.rate && !(*opt.rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "replay rate must be > 0");
    BagReader reader(path);
    std::map<std::string, TopicHandle, std::less<>> handles;
    for (const auto& d : reader.manifest().topics)
        if (!excluded(d.name, opt.exclude_prefixes)) handles.emplace(d.name, bus.has_topic(d.name) ? bus.handle(d.name) : bus.open_topic(d));

    if (opt.on_ready) opt.on_ready(bus);

    ReplayStats st;
    const auto wall0 = std::chrono::steady_clock::now();
    std::optional<Timestamp> t0, last_adv;
    while (auto s = reader.next()) {
        const auto it = handles.find(s->topic);
        if (it == handles.end()) {
            ++st.skipped;
            continue;
        }
        if (!t0) t0 = s->t;
        if (opt.rate) {
            const auto due = wall0 + std::chrono::nanoseconds(static_cast<std::int64_t>(static_cast<double>(s->t.nanos - t0->nanos) / *opt.rate));
            std::this_thread::sleep_until(due);
        }
        if (!last_adv || s->t > *last_adv) {
            Timestamp wm = s->t;
            if (opt.watermark_cap)
                if (const auto cap = opt.watermark_cap()) wm = std::min(wm, *cap);
            bus.advance_watermark(wm);
            last_adv = s->t;
        }
        bus.publish(it->second, s->t, s->payload->values());
        ++st.published;
    }
    st.warnings = reader.warnings();
    st.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return st;
}

} // namespace mwpipe::bag
