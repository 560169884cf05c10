#pragma once

#include "mwpipe/bag.hpp"
#include "mwpipe/physio.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mwpipe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

/// Records `seconds` of all six raw biosignals from `profile` into a bag.
inline void write_physio_bag(const std::string& path, mwpipe::synth::SynthProfile profile, double seconds) {
    using namespace mwpipe;
    Bus bus;
    const auto handles = open_physio_topics(bus, profile.resp_fs_hz);
    bag::BagRecorder rec(bus, path, bag::json{{"kind", "test"}}, 0);
    const auto streams = render_physio(profile, Timestamp{0}, Timestamp{seconds_to_ns(seconds)});
    auto pending = pending_physio(streams, handles);
    publish_in_order(bus, pending, [&](Timestamp t) { bus.advance_watermark(t); });
    bus.close();
}

} // namespace testing
