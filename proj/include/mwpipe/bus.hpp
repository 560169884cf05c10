#pragma once

// Topic-based publish/subscribe hub on a single session clock.
//
// Per-topic (t, seq) strictly increase. Cross-topic order is only defined by the
// merge operators, which serialize by (t, topic name, seq). A merged subscription
// releases samples once the bus watermark guarantees nothing earlier can arrive.

#include "mwpipe/error.hpp"
#include "mwpipe/payload.hpp"
#include "mwpipe/time.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mwpipe {

struct TopicDescriptor {
    std::string name;
    SchemaPtr schema;
    Rate rate = Rate::aperiodic();
};

/// Dot-separated, at least two non-empty segments of [A-Za-z0-9_-].
[[nodiscard]] inline bool is_valid_topic_name(std::string_view name) noexcept {
    if (name.empty()) return false;
    std::size_t segments = 0;
    std::size_t seg_len = 0;
    for (const char c : name) {
        if (c == '.') {
            if (seg_len == 0) return false;
            ++segments;
            seg_len = 0;
            continue;
        }
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) return false;
        ++seg_len;
    }
    if (seg_len == 0) return false;
    return segments + 1 >= 2;
}

struct TopicHandle {
    std::size_t index = 0;
    std::string name;
};

struct TimedSample {
    std::string topic;
    Timestamp t;
    std::uint64_t seq = 0;
    std::shared_ptr<const Payload> payload;

    bool operator==(const TimedSample& o) const {
        return topic == o.topic && t == o.t && seq == o.seq &&
               ((payload == o.payload) || (payload && o.payload && *payload == *o.payload));
    }
};

/// The deterministic global order: t, then topic name, then seq.
[[nodiscard]] inline bool sample_before(const TimedSample& a, const TimedSample& b) noexcept {
    if (a.t != b.t) return a.t < b.t;
    if (a.topic != b.topic) return a.topic < b.topic;
    return a.seq < b.seq;
}

/// Bounded hand-off queue for a subscriber on another thread. Overflow is an error
/// raised to the publisher; there is no other backpressure policy.
class SampleQueue {
public:
    explicit SampleQueue(std::size_t capacity) : capacity_(capacity) {}

    void push(const TimedSample& s) {
        {
            std::lock_guard lock(mu_);
            if (items_.size() >= capacity_)
                throw Error(ErrorCode::QueueOverflow, "subscriber queue full (capacity " + std::to_string(capacity_) + ")");
            items_.push_back(s);
        }
        cv_.notify_one();
    }

    /// Blocks until a sample arrives or the queue is closed and drained.
    std::optional<TimedSample> pop() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        auto s = std::move(items_.front());
        items_.pop_front();
        return s;
    }

    std::optional<TimedSample> try_pop() {
        std::lock_guard lock(mu_);
        if (items_.empty()) return std::nullopt;
        auto s = std::move(items_.front());
        items_.pop_front();
        return s;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<TimedSample> items_;
    bool closed_ = false;
};

/// Buffers samples from several topics and releases them in global order once the
/// bus watermark passes them (or the bus closes).
class MergedSubscription {
public:
    using ReleaseFn = std::function<void(std::vector<TimedSample>&&)>;

    void on_release(ReleaseFn fn) {
        std::lock_guard lock(mu_);
        release_fn_ = std::move(fn);
    }

    /// Samples with t strictly below the watermark, in global order.
    std::vector<TimedSample> take_ready() {
        std::lock_guard lock(mu_);
        return take_ready_locked();
    }

    [[nodiscard]] std::size_t pending() const {
        std::lock_guard lock(mu_);
        return heap_.size();
    }

private:
    friend class Bus;

    struct Later {
        bool operator()(const TimedSample& a, const TimedSample& b) const noexcept { return sample_before(b, a); }
    };

    void push(const TimedSample& s) {
        std::lock_guard lock(mu_);
        heap_.push(s);
    }

    void advance(Timestamp watermark, bool closed) {
        ReleaseFn fn;
        std::vector<TimedSample> ready;
        {
            std::lock_guard lock(mu_);
            watermark_ = watermark;
            closed_ = closed_ || closed;
            if (!release_fn_) return;
            fn = release_fn_;
            ready = take_ready_locked();
        }
        if (!ready.empty()) fn(std::move(ready));
    }

    std::vector<TimedSample> take_ready_locked() {
        std::vector<TimedSample> out;
        while (!heap_.empty() && (closed_ || heap_.top().t < watermark_)) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        return out;
    }

    mutable std::mutex mu_;
    std::priority_queue<TimedSample, std::vector<TimedSample>, Later> heap_;
    Timestamp watermark_{};
    bool closed_ = false;
    ReleaseFn release_fn_;
};

struct BusOptions {
    std::size_t default_queue_capacity = 1u << 16;
};

class Bus {
public:
    using Callback = std::function<void(const TimedSample&)>;
    using SubscriptionId = std::uint64_t;

    explicit Bus(std::shared_ptr<Clock> clock = std::make_shared<ManualClock>(), BusOptions options = {})
        : clock_(std::move(clock)), options_(options) {}

    Bus(const Bus&) = delete;
    Bus& operator=(const Bus&) = delete;

    TopicHandle open_topic(TopicDescriptor desc) {
        if (!is_valid_topic_name(desc.name)) throw Error(ErrorCode::InvalidName, "invalid topic name '" + desc.name + "'");
        if (!desc.schema) throw Error(ErrorCode::SchemaMismatch, "topic '" + desc.name + "' has no schema");
        std::unique_lock lock(registry_mu_);
        if (by_name_.contains(desc.name)) throw Error(ErrorCode::DuplicateTopic, "topic '" + desc.name + "' already open");
        const std::size_t idx = topics_.size();
        auto state = std::make_unique<TopicState>();
        state->desc = std::move(desc);
        by_name_.emplace(state->desc.name, idx);
        TopicHandle h{idx, state->desc.name};
        topics_.push_back(std::move(state));
        return h;
    }

    /// Publishes on `h`. With no timestamp the sample is stamped from the session clock.
    TimedSample publish(const TopicHandle& h, std::optional<Timestamp> t, std::vector<Value> values) {
        TopicState& ts = topic_state(h);
        return publish_impl(ts, t, Payload(ts.desc.schema, std::move(values)));
    }

    TimedSample publish(const TopicHandle& h, std::optional<Timestamp> t, Payload payload) {
        return publish_impl(topic_state(h), t, std::move(payload));
    }

    /// Synchronous delivery on the publisher's thread. Callbacks must not publish on the
    /// topic that triggered them.
    SubscriptionId subscribe(const std::set<std::string>& topics, Callback cb) {
        check_known(topics);
        auto sink = std::make_shared<Sink>();
        sink->topics = topics;
        sink->callback = std::move(cb);
        return add_sink(std::move(sink));
    }

    std::shared_ptr<SampleQueue> subscribe_queue(const std::set<std::string>& topics, std::size_t capacity = 0) {
        check_known(topics);
        auto q = std::make_shared<SampleQueue>(capacity ? capacity : options_.default_queue_capacity);
        auto sink = std::make_shared<Sink>();
        sink->topics = topics;
        sink->queue = q;
        add_sink(std::move(sink));
        return q;
    }

    /// Union of the given topics in (t, topic, seq) order, released as the watermark advances.
    std::shared_ptr<MergedSubscription> subscribe_merged(const std::set<std::string>& topics) {
        check_known(topics);
        auto merged = std::make_shared<MergedSubscription>();
        auto sink = std::make_shared<Sink>();
        sink->topics = topics;
        sink->merged = merged;
        add_sink(std::move(sink));
        merged->advance(Timestamp{watermark_.load()}, closed_.load());
        return merged;
    }

    void unsubscribe(SubscriptionId id) {
        std::lock_guard lock(sinks_mu_);
        auto next = std::make_shared<std::vector<std::shared_ptr<Sink>>>();
        for (const auto& s : *sinks_)
            if (s->id != id) next->push_back(s);
        sinks_ = std::move(next);
    }

    /// Declares that nothing stamped earlier than `t` will be published on any topic.
    /// Must not be called from inside a subscriber callback.
    void advance_watermark(Timestamp t) {
        {
            std::unique_lock gate(gate_);
            if (t.nanos <= watermark_.load()) return;
            watermark_.store(t.nanos);
        }
        notify_merged(false);
    }

    [[nodiscard]] Timestamp watermark() const noexcept { return Timestamp{watermark_.load()}; }

    /// Ends the session: merged subscriptions release everything, queues close.
    void close() {
        {
            std::unique_lock gate(gate_);
            if (closed_.exchange(true)) return;
        }
        notify_merged(true);
        std::shared_ptr<const std::vector<std::shared_ptr<Sink>>> sinks;
        {
            std::lock_guard lock(sinks_mu_);
            sinks = sinks_;
        }
        for (const auto& s : *sinks)
            if (s->queue) s->queue->close();
    }

    [[nodiscard]] bool closed() const noexcept { return closed_.load(); }

    [[nodiscard]] std::vector<TopicDescriptor> topics() const {
        std::shared_lock lock(registry_mu_);
        std::vector<TopicDescriptor> out;
        out.reserve(topics_.size());
        for (const auto& t : topics_) out.push_back(t->desc);
        return out;
    }

    [[nodiscard]] bool has_topic(std::string_view name) const {
        std::shared_lock lock(registry_mu_);
        return by_name_.find(name) != by_name_.end();
    }

    [[nodiscard]] TopicDescriptor descriptor(std::string_view name) const {
        std::shared_lock lock(registry_mu_);
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + std::string(name) + "'");
        return topics_[it->second]->desc;
    }

    [[nodiscard]] TopicHandle handle(std::string_view name) const {
        std::shared_lock lock(registry_mu_);
        const auto it = by_name_.find(name);
        if (it == by_name_.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + std::string(name) + "'");
        return TopicHandle{it->second, std::string(name)};
    }

    [[nodiscard]] std::optional<Timestamp> last_time(std::string_view name) const {
        const auto h = handle(name);
        TopicState& ts = const_cast<Bus*>(this)->topic_state(h);
        std::lock_guard lock(ts.mu);
        return ts.last_t;
    }

    [[nodiscard]] Clock& clock() const noexcept { return *clock_; }

private:
    struct TopicState {
        TopicDescriptor desc;
        std::mutex mu;
        std::optional<Timestamp> last_t;
        std::uint64_t next_seq = 0;
    };

    struct Sink {
        SubscriptionId id = 0;
        std::set<std::string> topics;
        Callback callback;
        std::shared_ptr<SampleQueue> queue;
        std::shared_ptr<MergedSubscription> merged;
    };

    TopicState& topic_state(const TopicHandle& h) {
        std::shared_lock lock(registry_mu_);
        if (h.index >= topics_.size() || topics_[h.index]->desc.name != h.name)
            throw Error(ErrorCode::UnknownTopic, "stale or foreign topic handle '" + h.name + "'");
        return *topics_[h.index];
    }

    void check_known(const std::set<std::string>& topics) const {
        std::shared_lock lock(registry_mu_);
        for (const auto& t : topics)
            if (!by_name_.contains(t)) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + t + "'");
    }

    SubscriptionId add_sink(std::shared_ptr<Sink> sink) {
        std::lock_guard lock(sinks_mu_);
        sink->id = ++next_sub_id_;
        auto next = std::make_shared<std::vector<std::shared_ptr<Sink>>>(*sinks_);
        next->push_back(sink);
        sinks_ = std::move(next);
        return sink->id;
    }

    void notify_merged(bool closing) {
        std::shared_ptr<const std::vector<std::shared_ptr<Sink>>> sinks;
        {
            std::lock_guard lock(sinks_mu_);
            sinks = sinks_;
        }
        const Timestamp wm{watermark_.load()};
        for (const auto& s : *sinks)
            if (s->merged) s->merged->advance(wm, closing);
    }

    // Publishes hold the gate shared (once per thread, so callbacks may publish on other
    // topics); watermark moves take it exclusively, so a sample is either rejected or
    // fully delivered before the merged subscriptions release past it.
    struct GateGuard {
        std::shared_lock<std::shared_mutex> lock;
        explicit GateGuard(std::shared_mutex& m) : lock(m, std::defer_lock) {
            if (depth_++ == 0) lock.lock();
        }
        ~GateGuard() { --depth_; }
        GateGuard(const GateGuard&) = delete;
        GateGuard& operator=(const GateGuard&) = delete;
    };

    TimedSample publish_impl(TopicState& ts, std::optional<Timestamp> t_opt, Payload payload) {
        GateGuard gate(gate_);
        if (closed_.load()) throw Error(ErrorCode::BusClosed, "bus closed");
        if (payload.schema() != ts.desc.schema && !(payload.schema() && *payload.schema() == *ts.desc.schema))
            throw Error(ErrorCode::SchemaMismatch, "payload schema does not match topic '" + ts.desc.name + "'");
        payload.validate();

        std::lock_guard lock(ts.mu);
        const Timestamp t = t_opt ? *t_opt : clock_->now();
        if (ts.last_t && t <= *ts.last_t)
            throw Error(ErrorCode::TimestampRegression, "topic '" + ts.desc.name + "': t=" + std::to_string(t.nanos) +
                                                            " <= previous t=" + std::to_string(ts.last_t->nanos));
        if (t.nanos < watermark_.load())
            throw Error(ErrorCode::TimestampRegression, "topic '" + ts.desc.name + "': t=" + std::to_string(t.nanos) +
                                                            " below watermark " + std::to_string(watermark_.load()));
        TimedSample sample{ts.desc.name, t, ts.next_seq, std::make_shared<const Payload>(std::move(payload))};
        ts.last_t = t;
        ++ts.next_seq;

        std::shared_ptr<const std::vector<std::shared_ptr<Sink>>> sinks;
        {
            std::lock_guard slock(sinks_mu_);
            sinks = sinks_;
        }
        for (const auto& s : *sinks) {
            if (!s->topics.contains(sample.topic)) continue;
            if (s->callback) s->callback(sample);
            if (s->queue) s->queue->push(sample);
            if (s->merged) s->merged->push(sample);
        }
        return sample;
    }

    std::shared_ptr<Clock> clock_;
    BusOptions options_;

    mutable std::shared_mutex registry_mu_;
    std::vector<std::unique_ptr<TopicState>> topics_;
    std::map<std::string, std::size_t, std::less<>> by_name_;

    std::mutex sinks_mu_;
    std::shared_ptr<const std::vector<std::shared_ptr<Sink>>> sinks_ =
        std::make_shared<const std::vector<std::shared_ptr<Sink>>>();
    SubscriptionId next_sub_id_ = 0;

    std::shared_mutex gate_;
    static inline thread_local int depth_ = 0;
    std::atomic<std::uint64_t> watermark_{0};
    std::atomic<bool> closed_{false};
};

// ---------------------------------------------------------------------------
// Pure operators over recorded streams.

using StreamSet = std::map<std::string, std::vector<TimedSample>, std::less<>>;

/// k-way merge of the named per-topic streams into global (t, topic, seq) order.
[[nodiscard]] inline std::vector<TimedSample> merge_streams(const StreamSet& streams, const std::set<std::string>& topics) {
    std::vector<const std::vector<TimedSample>*> inputs;
    for (const auto& name : topics) {
        const auto it = streams.find(name);
        if (it == streams.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + name + "'");
        inputs.push_back(&it->second);
    }
    struct Cursor {
        const std::vector<TimedSample>* v;
        std::size_t i;
    };
    auto later = [](const Cursor& a, const Cursor& b) { return sample_before((*b.v)[b.i], (*a.v)[a.i]); };
    std::priority_queue<Cursor, std::vector<Cursor>, decltype(later)> heap(later);
    std::size_t total = 0;
    for (const auto* v : inputs) {
        total += v->size();
        if (!v->empty()) heap.push({v, 0});
    }
    std::vector<TimedSample> out;
    out.reserve(total);
    while (!heap.empty()) {
        auto c = heap.top();
        heap.pop();
        out.push_back((*c.v)[c.i]);
        if (++c.i < c.v->size()) heap.push(c);
    }
    return out;
}

inline constexpr std::uint64_t kDefaultAlignToleranceNs = 50'000'000; // half a 10 Hz telemetry tick
inline constexpr std::uint64_t kUnboundedTolerance = std::numeric_limits<std::uint64_t>::max();

/// Index of the sample nearest to `t` within `tolerance_ns`; the earlier sample wins ties.
[[nodiscard]] inline std::optional<std::size_t> nearest_index(std::span<const TimedSample> stream, Timestamp t,
                                                              std::uint64_t tolerance_ns) {
    if (stream.empty()) return std::nullopt;
    const auto it = std::lower_bound(stream.begin(), stream.end(), t,
                                     [](const TimedSample& s, Timestamp x) { return s.t < x; });
    std::optional<std::size_t> best;
    std::uint64_t best_dist = 0;
    if (it != stream.begin()) {
        const auto i = static_cast<std::size_t>(std::distance(stream.begin(), it)) - 1;
        best = i;
        best_dist = t.nanos - stream[i].t.nanos;
    }
    if (it != stream.end()) {
        const auto i = static_cast<std::size_t>(std::distance(stream.begin(), it));
        const std::uint64_t d = stream[i].t.nanos - t.nanos;
        if (!best || d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    if (best && best_dist <= tolerance_ns) return best;
    return std::nullopt;
}

struct AlignedEntry {
    TimedSample sample;
    std::int64_t offset_ns = 0; // sample.t - anchor_t
};

struct AlignedFrame {
    std::string anchor_topic;
    Timestamp anchor_t;
    std::map<std::string, AlignedEntry, std::less<>> joined;
};

/// Pairs an arbitrary anchor time axis with the nearest sample of each other stream.
[[nodiscard]] inline std::vector<AlignedFrame> align_at(std::string_view anchor_name, std::span<const Timestamp> anchors,
                                                        const StreamSet& streams, const std::set<std::string>& others,
                                                        std::uint64_t tolerance_ns) {
    if (tolerance_ns == 0) throw Error(ErrorCode::InvalidArgument, "alignment tolerance must be > 0");
    std::vector<const std::vector<TimedSample>*> inputs;
    for (const auto& name : others) {
        const auto it = streams.find(name);
        if (it == streams.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + name + "'");
        inputs.push_back(&it->second);
    }
    std::vector<AlignedFrame> frames;
    frames.reserve(anchors.size());
    for (const Timestamp at : anchors) {
        AlignedFrame f{std::string(anchor_name), at, {}};
        std::size_t k = 0;
        for (const auto& name : others) {
            const auto& stream = *inputs[k++];
            if (const auto idx = nearest_index(stream, at, tolerance_ns))
                f.joined.emplace(name, AlignedEntry{stream[*idx], diff_ns(stream[*idx].t, at)});
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

/// One frame per anchor sample; other topics join their nearest sample within tolerance.
[[nodiscard]] inline std::vector<AlignedFrame> align_nearest(const StreamSet& streams, const std::string& anchor,
                                                             const std::set<std::string>& others,
                                                             std::uint64_t tolerance_ns = kDefaultAlignToleranceNs) {
    const auto it = streams.find(anchor);
    if (it == streams.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic '" + anchor + "'");
    std::vector<Timestamp> times;
    times.reserve(it->second.size());
    for (const auto& s : it->second) times.push_back(s.t);
    return align_at(anchor, times, streams, others, tolerance_ns);
}

} // namespace mwpipe
