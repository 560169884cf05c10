#include <catch_amalgamated.hpp>

#include "mwpipe/bus.hpp"

#include <atomic>
#include <random>
#include <thread>

using namespace mwpipe;

namespace {

SchemaPtr scalar_schema() { return make_schema("scalar", {{"v", FieldType::Float, false}}); }

TimedSample make_sample(std::string topic, std::uint64_t t, std::uint64_t seq) {
    return {std::move(topic), Timestamp{t}, seq, std::make_shared<const Payload>(scalar_schema(), std::vector<Value>{0.0})};
}

} // namespace

TEST_CASE("topic names must be dot separated") {
    CHECK(is_valid_topic_name("bio.ecg"));
    CHECK(is_valid_topic_name("a.b.c_d-1"));
    CHECK_FALSE(is_valid_topic_name(""));
    CHECK_FALSE(is_valid_topic_name("ecg"));
    CHECK_FALSE(is_valid_topic_name(".ecg"));
    CHECK_FALSE(is_valid_topic_name("bio..ecg"));
    CHECK_FALSE(is_valid_topic_name("bio.ecg."));
    CHECK_FALSE(is_valid_topic_name("bio.e cg"));
}

TEST_CASE("open_topic registers and rejects duplicates") {
    Bus bus;
    const auto h = bus.open_topic({"bio.ecg", scalar_schema(), Rate::hz(252)});
    CHECK(h.name == "bio.ecg");
    CHECK(bus.descriptor("bio.ecg").rate == Rate::hz(252));
    bus.open_topic({"sim.rover", scalar_schema(), Rate::hz(10)});
    try {
        bus.open_topic({"bio.ecg", scalar_schema(), Rate::hz(252)});
        FAIL("expected DuplicateTopic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateTopic);
    }
    try {
        bus.open_topic({"ecg", scalar_schema(), Rate::hz(252)});
        FAIL("expected InvalidName");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidName);
    }
}

TEST_CASE("publish assigns sequence numbers and enforces monotonic time") {
    Bus bus;
    const auto h = bus.open_topic({"bio.ecg", scalar_schema(), Rate::hz(252)});
    const auto s0 = bus.publish(h, Timestamp{0}, {1.0});
    CHECK(s0.seq == 0);
    CHECK(s0.t.nanos == 0);
    bus.publish(h, Timestamp{1'000'000}, {1.0});
    try {
        bus.publish(h, Timestamp{999'999}, {1.0});
        FAIL("expected TimestampRegression");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TimestampRegression);
    }
    try {
        bus.publish(h, Timestamp{1'000'000}, {1.0});
        FAIL("expected TimestampRegression on equal stamp");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TimestampRegression);
    }
}

TEST_CASE("publish rejects payloads that violate the schema") {
    Bus bus;
    const auto h = bus.open_topic({"bio.ecg", scalar_schema(), Rate::hz(252)});
    CHECK_THROWS_MATCHES(bus.publish(h, Timestamp{0}, {std::int64_t{1}}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::SchemaMismatch; }));
    CHECK_THROWS_AS(bus.publish(h, Timestamp{0}, {1.0, 2.0}), Error);
    CHECK_THROWS_AS(bus.publish(h, Timestamp{0}, {std::monostate{}}), Error);
    const auto other = make_schema("other", {{"w", FieldType::Float, false}});
    CHECK_THROWS_AS(bus.publish(h, Timestamp{0}, Payload(other, {1.0})), Error);
}

TEST_CASE("252 Hz grid stamps follow integer floor division") {
    Bus bus;
    const auto rate = Rate::hz(252);
    const auto h = bus.open_topic({"bio.ecg", scalar_schema(), rate});
    std::vector<TimedSample> got;
    bus.subscribe({"bio.ecg"}, [&](const TimedSample& s) { got.push_back(s); });
    for (std::uint64_t k = 0; k < 252; ++k) bus.publish(h, rate.grid_time(k), {0.0});
    REQUIRE(got.size() == 252);
    for (std::uint64_t k = 0; k < 252; ++k) {
        CHECK(got[k].seq == k);
        // floor(k * 1e9 / 252), computed independently
        CHECK(got[k].t.nanos == (k * 1'000'000'000ULL) / 252ULL);
    }
    const auto d = got[1].t.nanos - got[0].t.nanos;
    CHECK((d == 3'968'253 || d == 3'968'254));
    CHECK(got[1].t.nanos == 3'968'253);
}

TEST_CASE("auto stamping uses the session clock") {
    auto clock = std::make_shared<ManualClock>();
    Bus bus(clock);
    const auto h = bus.open_topic({"sim.meta", scalar_schema(), Rate::aperiodic()});
    clock->set(Timestamp{500});
    CHECK(bus.publish(h, std::nullopt, {1.0}).t.nanos == 500);
    CHECK_THROWS_AS(bus.publish(h, std::nullopt, {1.0}), Error);
    clock->set(Timestamp{700});
    CHECK(bus.publish(h, std::nullopt, {1.0}).t.nanos == 700);
    CHECK_THROWS_AS(clock->set(Timestamp{10}), Error);
}

TEST_CASE("subscribe to unknown topic fails") {
    Bus bus;
    CHECK_THROWS_AS(bus.subscribe({"no.such"}, [](const TimedSample&) {}), Error);
    CHECK_THROWS_AS(bus.subscribe_merged({"no.such"}), Error);
}

TEST_CASE("merged subscription orders by time then topic then seq") {
    Bus bus;
    const auto a = bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    const auto b = bus.open_topic({"b.y", scalar_schema(), Rate::aperiodic()});
    auto merged = bus.subscribe_merged({"a.x", "b.y"});
    bus.publish(b, Timestamp{2}, {0.0});
    bus.publish(b, Timestamp{4}, {0.0});
    bus.publish(a, Timestamp{1}, {0.0});
    bus.publish(a, Timestamp{3}, {0.0});
    bus.publish(b, Timestamp{5}, {0.0});
    bus.publish(a, Timestamp{5}, {0.0});
    CHECK(merged->take_ready().empty());
    bus.advance_watermark(Timestamp{5});
    auto ready = merged->take_ready();
    REQUIRE(ready.size() == 4);
    CHECK(ready[0].t.nanos == 1);
    CHECK(ready[1].t.nanos == 2);
    CHECK(ready[2].t.nanos == 3);
    CHECK(ready[3].t.nanos == 4);
    bus.close();
    ready = merged->take_ready();
    REQUIRE(ready.size() == 2);
    CHECK(ready[0].topic == "a.x");
    CHECK(ready[1].topic == "b.y");
}

TEST_CASE("merged subscription over the empty topic set yields nothing") {
    Bus bus;
    bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    auto merged = bus.subscribe_merged({});
    bus.publish(bus.handle("a.x"), Timestamp{1}, {0.0});
    bus.close();
    CHECK(merged->take_ready().empty());
}

TEST_CASE("publishing below the watermark is rejected") {
    Bus bus;
    const auto a = bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    bus.advance_watermark(Timestamp{100});
    CHECK_THROWS_AS(bus.publish(a, Timestamp{99}, {0.0}), Error);
    CHECK_NOTHROW(bus.publish(a, Timestamp{100}, {0.0}));
}

TEST_CASE("callbacks may publish onto other topics") {
    Bus bus;
    const auto a = bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    const auto b = bus.open_topic({"b.y", scalar_schema(), Rate::aperiodic()});
    auto merged = bus.subscribe_merged({"a.x", "b.y"});
    bus.subscribe({"a.x"}, [&](const TimedSample& s) { bus.publish(b, s.t, {1.0}); });
    bus.publish(a, Timestamp{10}, {0.0});
    bus.publish(a, Timestamp{20}, {0.0});
    bus.close();
    const auto all = merged->take_ready();
    REQUIRE(all.size() == 4);
    CHECK(all[0].topic == "a.x");
    CHECK(all[1].topic == "b.y");
    CHECK(all[1].t.nanos == 10);
}

TEST_CASE("bounded queue raises on overflow") {
    Bus bus;
    const auto a = bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    auto q = bus.subscribe_queue({"a.x"}, 2);
    bus.publish(a, Timestamp{1}, {0.0});
    bus.publish(a, Timestamp{2}, {0.0});
    try {
        bus.publish(a, Timestamp{3}, {0.0});
        FAIL("expected QueueOverflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::QueueOverflow);
    }
    CHECK(q->size() == 2);
    CHECK(q->try_pop()->t.nanos == 1);
}

TEST_CASE("closed bus rejects publishes and closes queues") {
    Bus bus;
    const auto a = bus.open_topic({"a.x", scalar_schema(), Rate::aperiodic()});
    auto q = bus.subscribe_queue({"a.x"});
    bus.publish(a, Timestamp{1}, {0.0});
    bus.close();
    CHECK(q->pop().has_value());
    CHECK_FALSE(q->pop().has_value());
    CHECK_THROWS_AS(bus.publish(a, Timestamp{2}, {0.0}), Error);
}

TEST_CASE("concurrent publishers keep per-topic order and merged output is a full ordered serialization") {
    Bus bus;
    constexpr int kTopics = 4;
    constexpr std::uint64_t kPerTopic = 2000;
    std::vector<TopicHandle> handles;
    std::set<std::string> names;
    for (int i = 0; i < kTopics; ++i) {
        const auto name = "t.topic" + std::to_string(i);
        handles.push_back(bus.open_topic({name, scalar_schema(), Rate::aperiodic()}));
        names.insert(name);
    }
    auto merged = bus.subscribe_merged(names);
    std::vector<TimedSample> released;
    merged->on_release([&](std::vector<TimedSample>&& batch) {
        released.insert(released.end(), batch.begin(), batch.end());
    });
    auto q = bus.subscribe_queue(names, kTopics * kPerTopic);

    std::atomic<bool> stop{false};
    std::thread pacer([&] {
        std::uint64_t wm = 0;
        while (!stop.load()) {
            // Only advance behind every publisher's progress.
            std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
            for (const auto& n : names) lo = std::min(lo, bus.last_time(n).value_or(Timestamp{0}).nanos);
            if (lo > wm) {
                wm = lo;
                bus.advance_watermark(Timestamp{wm});
            }
            std::this_thread::yield();
        }
    });
    std::vector<std::thread> pubs;
    for (int i = 0; i < kTopics; ++i) {
        pubs.emplace_back([&, i] {
            for (std::uint64_t k = 1; k <= kPerTopic; ++k) bus.publish(handles[static_cast<std::size_t>(i)], Timestamp{k * 10 + static_cast<std::uint64_t>(i % 2)}, {0.0});
        });
    }
    for (auto& t : pubs) t.join();
    stop = true;
    pacer.join();
    bus.close();

    REQUIRE(released.size() == kTopics * kPerTopic);
    for (std::size_t i = 1; i < released.size(); ++i) CHECK_FALSE(sample_before(released[i], released[i - 1]));
    std::map<std::string, std::uint64_t> next;
    std::size_t popped = 0;
    while (auto s = q->try_pop()) {
        CHECK(s->seq == next[s->topic]++);
        ++popped;
    }
    CHECK(popped == kTopics * kPerTopic);
}

TEST_CASE("merge_streams is an ordered permutation and deterministic") {
    std::mt19937_64 rng(7);
    StreamSet streams;
    std::size_t total = 0;
    for (const char* name : {"a.x", "b.y", "c.z"}) {
        std::uint64_t t = 0;
        auto& v = streams[name];
        for (std::uint64_t k = 0; k < 300; ++k) {
            t += 1 + rng() % 5;
            v.push_back(make_sample(name, t, k));
        }
        total += v.size();
    }
    const std::set<std::string> all{"a.x", "b.y", "c.z"};
    const auto m1 = merge_streams(streams, all);
    const auto m2 = merge_streams(streams, all);
    REQUIRE(m1.size() == total);
    CHECK(m1 == m2);
    for (std::size_t i = 1; i < m1.size(); ++i) CHECK(sample_before(m1[i - 1], m1[i]));
    CHECK(merge_streams(streams, {}).empty());
    CHECK_THROWS_AS(merge_streams(streams, {"q.q"}), Error);
}

TEST_CASE("merge of interleaved stamps and ties") {
    StreamSet s;
    s["a.x"] = {make_sample("a.x", 1, 0), make_sample("a.x", 3, 1)};
    s["b.y"] = {make_sample("b.y", 2, 0), make_sample("b.y", 4, 1)};
    auto m = merge_streams(s, {"a.x", "b.y"});
    REQUIRE(m.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m[i].t.nanos == i + 1);

    StreamSet tie;
    tie["b.y"] = {make_sample("b.y", 7, 0)};
    tie["a.x"] = {make_sample("a.x", 7, 0)};
    m = merge_streams(tie, {"a.x", "b.y"});
    CHECK(m[0].topic == "a.x");
}

TEST_CASE("align_nearest joins within tolerance and breaks ties toward the earlier sample") {
    StreamSet s;
    s["anc.a"] = {make_sample("anc.a", 1000, 0)};
    s["oth.b"] = {make_sample("oth.b", 980, 0), make_sample("oth.b", 1030, 1)};
    s["oth.c"] = {make_sample("oth.c", 1100, 0)};
    s["oth.d"] = {make_sample("oth.d", 990, 0), make_sample("oth.d", 1010, 1)};
    const auto frames = align_nearest(s, "anc.a", {"oth.b", "oth.c", "oth.d"}, 50);
    REQUIRE(frames.size() == 1);
    const auto& f = frames[0];
    CHECK(f.anchor_t.nanos == 1000);
    REQUIRE(f.joined.contains("oth.b"));
    CHECK(f.joined.at("oth.b").sample.t.nanos == 980);
    CHECK(f.joined.at("oth.b").offset_ns == -20);
    CHECK_FALSE(f.joined.contains("oth.c"));
    REQUIRE(f.joined.contains("oth.d"));
    CHECK(f.joined.at("oth.d").sample.t.nanos == 990);
    CHECK_THROWS_AS(align_nearest(s, "anc.a", {"oth.b"}, 0), Error);
    CHECK_THROWS_AS(align_nearest(s, "anc.a", {"zz.z"}, 10), Error);
}

TEST_CASE("alignment offsets never exceed tolerance; unbounded tolerance joins every topic") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        StreamSet s;
        for (const char* name : {"anc.a", "oth.b", "oth.c"}) {
            std::uint64_t t = rng() % 50;
            auto& v = s[name];
            const auto n = 1 + rng() % 40;
            for (std::uint64_t k = 0; k < n; ++k) {
                v.push_back(make_sample(name, t, k));
                t += 1 + rng() % 100;
            }
        }
        const std::uint64_t tol = 1 + rng() % 60;
        for (const auto& f : align_nearest(s, "anc.a", {"oth.b", "oth.c"}, tol))
            for (const auto& [name, e] : f.joined) {
                CHECK(static_cast<std::uint64_t>(std::abs(e.offset_ns)) <= tol);
                // brute force: nothing strictly closer exists
                for (const auto& o : s[name]) CHECK(static_cast<std::uint64_t>(std::abs(diff_ns(o.t, f.anchor_t))) >= static_cast<std::uint64_t>(std::abs(e.offset_ns)));
            }
        for (const auto& f : align_nearest(s, "anc.a", {"oth.b", "oth.c"}, kUnboundedTolerance)) CHECK(f.joined.size() == 2);
    }
}
