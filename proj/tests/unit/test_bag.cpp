#include <catch_amalgamated.hpp>

#include "support.hpp"

#include "mwpipe/bag.hpp"

#include <random>

using namespace mwpipe;
using testing::TempDir;

namespace {

SchemaPtr mixed_schema() {
    static const SchemaPtr s = make_schema("test.mixed", {{"f", FieldType::Float},
                                                          {"i", FieldType::Int},
                                                          {"b", FieldType::Bool},
                                                          {"s", FieldType::String},
                                                          {"v", FieldType::FloatVec},
                                                          {"n", FieldType::Float, true}});
    return s;
}

double random_double(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> exp(-300, 300);
    return std::ldexp(mant(rng), exp(rng));
}

// Publishes random samples on three topics and returns them in recorded order.
std::vector<TimedSample> record_random(const std::string& path, std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    Bus bus;
    const auto a = bus.open_topic({"test.a", mixed_schema(), Rate::aperiodic()});
    const auto b = bus.open_topic({"test.b", mixed_schema(), Rate::aperiodic()});
    const auto c = bus.open_topic({"test.c", make_schema("test.scalar", {{"v", FieldType::Float}}), Rate::hz(10)});
    bag::BagRecorder rec(bus, path, bag::json{{"note", "random"}}, 123);
    std::vector<TimedSample> published;
    bus.subscribe({"test.a", "test.b", "test.c"}, [&](const TimedSample& s) { published.push_back(s); });

    std::uint64_t t = 1'000;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 3 == 0) t += (1 + rng() % 3) * 10'000'000; // the three topics share t, exercising the tie order
        const auto& h = (i % 3 == 0) ? a : (i % 3 == 1) ? b : c;
        if (h.name == "test.c") {
            bus.publish(h, Timestamp{t}, {random_double(rng)});
            continue;
        }
        std::vector<double> vec(rng() % 4);
        for (auto& x : vec) x = random_double(rng);
        Value nullable = (rng() % 2) ? Value{random_double(rng)} : Value{std::monostate{}};
        bus.publish(h, Timestamp{t},
                    {random_double(rng), static_cast<std::int64_t>(rng()), rng() % 2 == 0, std::string("s,\"q\"\n") + std::to_string(i),
                     vec, nullable});
        if (i % 17 == 0) bus.advance_watermark(Timestamp{t});
    }
    bus.close();
    std::stable_sort(published.begin(), published.end(), sample_before);
    return published;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + '\n';
    return out;
}

} // namespace

TEST_CASE("record then read reproduces every sample exactly") {
    TempDir dir;
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const auto path = dir.file("rt.bag");
        const auto published = record_random(path, seed, 600);
        const auto bag = bag::read_bag(path);
        CHECK(bag.warnings.empty());
        CHECK(bag.manifest.epoch_unix_ns == 123);
        CHECK(bag.manifest.session["note"] == "random");
        REQUIRE(bag.manifest.topics.size() == 3);
        CHECK(*bag.manifest.find("test.a")->schema == *mixed_schema());
        CHECK(bag.manifest.find("test.c")->rate == Rate::hz(10));
        REQUIRE(bag.records.size() == published.size());
        for (std::size_t i = 0; i < published.size(); ++i) REQUIRE(bag.records[i] == published[i]);
        CHECK(bag::validate_bag(path).ok());
    }
}

TEST_CASE("an empty session is a valid bag with header and manifest only") {
    TempDir dir;
    const auto path = dir.file("empty.bag");
    {
        Bus bus;
        bus.open_topic({"bio.ecg", make_schema("s", {{"v", FieldType::Float}}), Rate::hz(252)});
        bag::BagRecorder rec(bus, path);
        bus.close();
    }
    CHECK(lines_of(testing::slurp(path)).size() == 2);
    const auto bag = bag::read_bag(path);
    CHECK(bag.records.empty());
    CHECK(bag.manifest.topics.size() == 1);
    const auto rep = bag::validate_bag(path);
    CHECK(rep.ok());
    CHECK(rep.records == 0);
}

TEST_CASE("the manifest is on disk before any record is released") {
    TempDir dir;
    const auto path = dir.file("live.bag");
    Bus bus;
    const auto h = bus.open_topic({"bio.st", make_schema("s", {{"v", FieldType::Float}}), Rate::hz(4)});
    bag::BagRecorder rec(bus, path);
    bus.publish(h, Timestamp{0}, {31.0});
    const auto before = lines_of(testing::slurp(path));
    REQUIRE(before.size() == 2);
    CHECK(before[0] == "MWBAG1");
    bus.advance_watermark(Timestamp{1});
    CHECK(lines_of(testing::slurp(path)).size() == 3);
    bus.close();
}

TEST_CASE("a truncated final line is skipped with a warning") {
    TempDir dir;
    const auto path = dir.file("cut.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 3.0);
    const auto full = bag::read_bag(path);
    auto text = testing::slurp(path);
    text.resize(text.size() - 20);
    testing::spit(path, text);

    const auto cut = bag::read_bag(path);
    CHECK(cut.records.size() == full.records.size() - 1);
    REQUIRE(cut.warnings.size() == 1);
    CHECK_THAT(cut.warnings[0], Catch::Matchers::ContainsSubstring("truncated"));

    const auto rep = bag::validate_bag(path);
    CHECK(rep.ok());
    CHECK(rep.warnings.size() == 1);

    Bus bus;
    const auto st = bag::replay(path, bus);
    CHECK(st.published == cut.records.size());
    CHECK(st.warnings.size() == 1);
}

TEST_CASE("a malformed record before the tail is corruption") {
    TempDir dir;
    const auto path = dir.file("bad.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 1.0);
    auto lines = lines_of(testing::slurp(path));
    lines[5] = lines[5].substr(0, lines[5].size() / 2);
    testing::spit(path, join_lines(lines));
    try {
        (void)bag::read_bag(path);
        FAIL("expected CorruptBag");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CorruptBag);
    }
    CHECK_FALSE(bag::validate_bag(path).ok());
}

TEST_CASE("foreign files are rejected by magic") {
    TempDir dir;
    const auto path = dir.file("foreign.bag");
    testing::spit(path, "MWBAG2\n{}\n");
    try {
        bag::BagReader r(path);
        FAIL("expected UnknownMagic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownMagic);
    }
    Bus bus;
    CHECK_THROWS_AS(bag::replay(path, bus), Error);
    const auto rep = bag::validate_bag(path);
    REQUIRE(rep.errors.size() == 1);
    CHECK_THAT(rep.errors[0].message, Catch::Matchers::ContainsSubstring("magic"));
}

TEST_CASE("validate names topic and seq of a contiguity break") {
    TempDir dir;
    const auto path = dir.file("seq.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 2.0);
    auto lines = lines_of(testing::slurp(path));
    // The record of bio.st with seq 3 claims seq 4.
    std::size_t target = 0;
    for (std::size_t i = 2; i < lines.size(); ++i)
        if (lines[i].find("\"topic\":\"bio.st\",\"seq\":3,") != std::string::npos) target = i;
    REQUIRE(target > 0);
    lines[target].replace(lines[target].find("\"seq\":3,"), 8, "\"seq\":4,");
    testing::spit(path, join_lines(lines));

    const auto rep = bag::validate_bag(path);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.errors[0].topic == "bio.st");
    CHECK(rep.errors[0].message == "seq jump: expected 3, got 4");
}

TEST_CASE("validate reports an out-of-order record with its byte offset") {
    TempDir dir;
    const auto path = dir.file("order.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 2.0);
    auto lines = lines_of(testing::slurp(path));
    // Swap two bio.ecg records several ticks apart; the later one now comes first.
    std::vector<std::size_t> ecg;
    for (std::size_t i = 2; i < lines.size(); ++i)
        if (lines[i].find("\"topic\":\"bio.ecg\"") != std::string::npos) ecg.push_back(i);
    const std::size_t i = ecg[10], j = ecg[20];
    std::swap(lines[i], lines[j]);
    testing::spit(path, join_lines(lines));

    std::uint64_t offset_after_swap = 0;
    for (std::size_t k = 0; k <= i; ++k) offset_after_swap += lines[k].size() + 1;

    const auto rep = bag::validate_bag(path);
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& e : rep.errors)
        if (e.message.starts_with("out of order") && e.offset == offset_after_swap) found = true;
    CHECK(found);
}

TEST_CASE("validate rejects every single-field mutation of magic, t order and seq") {
    TempDir dir;
    const auto path = dir.file("base.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 2.0);
    REQUIRE(bag::validate_bag(path).ok());
    const auto lines = lines_of(testing::slurp(path));
    const auto mutated = dir.file("mut.bag");
    std::mt19937_64 rng(99);

    // magic: every single-character change
    for (std::size_t pos = 0; pos < lines[0].size(); ++pos) {
        auto m = lines;
        m[0][pos] = static_cast<char>(m[0][pos] == 'X' ? 'Y' : 'X');
        testing::spit(mutated, join_lines(m));
        REQUIRE_FALSE(bag::validate_bag(mutated).ok());
    }

    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t i = 3 + rng() % (lines.size() - 3);
        auto j = bag::json::parse(lines[i]);

        auto m = lines;
        auto js = j;
        js["seq"] = j["seq"].get<std::uint64_t>() + 1 + rng() % 3;
        m[i] = js.dump();
        testing::spit(mutated, join_lines(m));
        REQUIRE_FALSE(bag::validate_bag(mutated).ok());

        // t moved before the previous record's t
        const auto prev_t = bag::json::parse(lines[i - 1])["t"].get<std::uint64_t>();
        if (prev_t == 0) continue;
        m = lines;
        auto jt = j;
        jt["t"] = prev_t - 1 - rng() % std::min<std::uint64_t>(prev_t, 1000);
        m[i] = jt.dump();
        testing::spit(mutated, join_lines(m));
        REQUIRE_FALSE(bag::validate_bag(mutated).ok());
    }
}

TEST_CASE("validate flags gaps, unknown topics and schema violations") {
    TempDir dir;
    const auto path = dir.file("v.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 3.0);
    const auto lines = lines_of(testing::slurp(path));

    auto check_one = [&](auto mutate, const std::string& expect) {
        auto m = lines;
        mutate(m);
        testing::spit(dir.file("m.bag"), join_lines(m));
        const auto rep = bag::validate_bag(dir.file("m.bag"));
        bool found = false;
        for (const auto& e : rep.errors)
            if (e.message.find(expect) != std::string::npos) found = true;
        CHECK(found);
    };

    auto find_line = [&](const std::vector<std::string>& m, const std::string& needle) {
        for (std::size_t i = 2; i < m.size(); ++i)
            if (m[i].find(needle) != std::string::npos) return i;
        return std::size_t{0};
    };

    // Dropping bio.st samples 4..7 leaves a 1.25 s hole at 4 Hz and a seq jump.
    check_one(
        [&](std::vector<std::string>& m) {
            for (int s = 4; s < 8; ++s) m.erase(m.begin() + static_cast<std::ptrdiff_t>(find_line(m, "\"topic\":\"bio.st\",\"seq\":" + std::to_string(s) + ",")));
        },
        "exceeds twice the period");
    check_one([&](std::vector<std::string>& m) { m[5].replace(m[5].find("\"topic\":\"bio."), 13, "\"topic\":\"xx."); },
              "not in manifest");
    check_one(
        [&](std::vector<std::string>& m) {
            auto j = bag::json::parse(m[6]);
            j["data"] = bag::json{{"wrong", 1.0}};
            m[6] = j.dump();
        },
        "missing field");
}

TEST_CASE("replay is the identity on the sample sequence") {
    TempDir dir;
    const auto src = dir.file("src.bag");
    const auto dst = dir.file("dst.bag");
    record_random(src, 11, 400);
    {
        Bus bus;
        std::optional<bag::BagRecorder> rec;
        bag::ReplayOptions opt;
        opt.on_ready = [&](Bus& b) { rec.emplace(b, dst, bag::json::object(), 123); };
        const auto st = bag::replay(src, bus, opt);
        bus.close();
        CHECK(st.published == 400);
    }
    const auto a = bag::read_bag(src);
    const auto b = bag::read_bag(dst);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) REQUIRE(a.records[i] == b.records[i]);
    CHECK(bag::read_body(src) == bag::read_body(dst));
}

TEST_CASE("replay can drop topics by prefix") {
    TempDir dir;
    const auto path = dir.file("p.bag");
    testing::write_physio_bag(path, synth::SynthProfile{}, 2.0);
    Bus bus;
    bag::ReplayOptions opt;
    opt.exclude_prefixes = {"bio.gaze", "bio.ecg"};
    const auto st = bag::replay(path, bus, opt);
    CHECK_FALSE(bus.has_topic("bio.gaze"));
    CHECK(bus.has_topic("bio.ppg"));
    CHECK(st.skipped == 2 * 120 + 2 * 252);
}

TEST_CASE("replay at rate 2 halves the wall-clock span") {
    TempDir dir;
    const auto path = dir.file("timed.bag");
    {
        Bus bus;
        const auto h = bus.open_topic({"bio.st", make_schema("s", {{"v", FieldType::Float}}), Rate::hz(4)});
        bag::BagRecorder rec(bus, path);
        for (int i = 0; i <= 16; ++i) bus.publish(h, Timestamp{static_cast<std::uint64_t>(i) * 250'000'000ULL}, {31.0});
        bus.close();
    }
    Bus bus;
    bag::ReplayOptions opt;
    opt.rate = 2.0;
    const auto st = bag::replay(path, bus, opt);
    CHECK(st.published == 17);
    CHECK(st.wall_s == Catch::Approx(2.0).epsilon(0.01));

    opt.rate = 0.0;
    Bus other;
    CHECK_THROWS_AS(bag::replay(path, other, opt), Error);
}
