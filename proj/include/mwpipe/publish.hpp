#pragma once

#include "mwpipe/bus.hpp"

#include <functional>
#include <vector>

namespace mwpipe {

/// A pre-rendered, time-ordered stream waiting to be published.
struct PendingStream {
    TopicHandle handle;
    std::size_t count = 0;
    std::function<Timestamp(std::size_t)> time;
    std::function<std::vector<Value>(std::size_t)> values;
};

/// Publishes several streams interleaved in (t, topic name) order so every subscriber
/// sees one global serialization. `before_each` runs ahead of every publish with the
/// sample time, e.g. to advance a clock.
inline void publish_in_order(Bus& bus, std::vector<PendingStream>& streams, const std::function<void(Timestamp)>& before_each = {}) {
    std::vector<std::size_t> cursor(streams.size(), 0);
    while (true) {
        std::size_t best = streams.size();
        Timestamp best_t{};
        for (std::size_t i = 0; i < streams.size(); ++i) {
            if (cursor[i] >= streams[i].count) continue;
            const Timestamp t = streams[i].time(cursor[i]);
            if (best == streams.size() || t < best_t || (t == best_t && streams[i].handle.name < streams[best].handle.name)) {
                best = i;
                best_t = t;
            }
        }
        if (best == streams.size()) return;
        if (before_each) before_each(best_t);
        bus.publish(streams[best].handle, best_t, streams[best].values(cursor[best]));
        ++cursor[best];
    }
}

} // namespace mwpipe
