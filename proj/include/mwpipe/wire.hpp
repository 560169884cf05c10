#pragma once

// Live-adapter wire protocol over TCP: each frame is a 4-byte big-endian length
// followed by that many bytes of JSON. The first frame is the bag manifest, every
// later frame one record in bag line format.

#include "mwpipe/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mwpipe::wire {

[[nodiscard]] inline std::string encode_frame(std::string_view payload) {
    if (payload.size() > 0xFFFFFFFFULL) throw Error(ErrorCode::InvalidArgument, "frame too large");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out(4, '\0');
    out[0] = static_cast<char>((n >> 24) & 0xFF);
    out[1] = static_cast<char>((n >> 16) & 0xFF);
    out[2] = static_cast<char>((n >> 8) & 0xFF);
    out[3] = static_cast<char>(n & 0xFF);
    out.append(payload);
    return out;
}

/// Incremental decoder for a byte stream of frames.
class FrameDecoder {
public:
    void feed(std::string_view bytes) { buf_.append(bytes); }

    std::optional<std::string> next() {
        if (buf_.size() - pos_ < 4) return std::nullopt;
        const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
        const std::size_t n = (std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) | (std::size_t{p[2]} << 8) | std::size_t{p[3]};
        if (buf_.size() - pos_ - 4 < n) return std::nullopt;
        std::string frame = buf_.substr(pos_ + 4, n);
        pos_ += 4 + n;
        if (pos_ > (1u << 20)) {
            buf_.erase(0, pos_);
            pos_ = 0;
        }
        return frame;
    }

private:
    std::string buf_;
    std::size_t pos_ = 0;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// "HOST:PORT" or ":PORT"; the host defaults to loopback.
[[nodiscard]] inline Endpoint parse_endpoint(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "address must be HOST:PORT");
    Endpoint e;
    if (colon > 0) e.host = std::string(text.substr(0, colon));
    const std::string port(text.substr(colon + 1));
    try {
        std::size_t used = 0;
        const auto v = std::stoul(port, &used);
        if (used != port.size() || v > 65535) throw std::out_of_range("port");
        e.port = static_cast<std::uint16_t>(v);
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidArgument, "bad port in '" + std::string(text) + "'");
    }
    return e;
}

namespace detail {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }
    void reset() noexcept {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    [[nodiscard]] int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }

private:
    int fd_ = -1;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorCode::IoError, what + ": " + std::strerror(errno)); }

[[nodiscard]] inline sockaddr_in resolve(const Endpoint& e) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(e.port);
    if (::inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw Error(ErrorCode::IoError, "cannot resolve '" + e.host + "'");
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

inline void send_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const auto n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("send failed");
        }
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

} // namespace detail

/// Listens on an endpoint and streams frames to a single accepted client.
class Server {
public:
    explicit Server(const Endpoint& e) : listen_(::socket(AF_INET, SOCK_STREAM, 0)) {
        if (!listen_) detail::fail("socket");
        const int one = 1;
        ::setsockopt(listen_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        const auto addr = detail::resolve(e);
        if (::bind(listen_.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) detail::fail("bind " + e.host);
        if (::listen(listen_.get(), 1) != 0) detail::fail("listen");
    }

    [[nodiscard]] std::uint16_t port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        if (::getsockname(listen_.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) detail::fail("getsockname");
        return ntohs(addr.sin_port);
    }

    /// Blocks until a client connects.
    void accept_one() {
        while (true) {
            const int fd = ::accept(listen_.get(), nullptr, nullptr);
            if (fd >= 0) {
                client_ = detail::Fd(fd);
                return;
            }
            if (errno != EINTR) detail::fail("accept");
        }
    }

    void send(std::string_view payload) {
        if (!client_) throw Error(ErrorCode::IoError, "no client connected");
        detail::send_all(client_.get(), encode_frame(payload));
    }

    void close_client() noexcept { client_.reset(); }

private:
    detail::Fd listen_;
    detail::Fd client_;
};

class Client {
public:
    explicit Client(const Endpoint& e) : fd_(::socket(AF_INET, SOCK_STREAM, 0)) {
        if (!fd_) detail::fail("socket");
        const auto addr = detail::resolve(e);
        if (::connect(fd_.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) detail::fail("connect");
    }

    /// Next frame, or empty once the server closes the connection.
    std::optional<std::string> read_frame() {
        while (true) {
            if (auto f = dec_.next()) return f;
            char buf[65536];
            const auto n = ::recv(fd_.get(), buf, sizeof buf, 0);
            if (n == 0) return std::nullopt;
            if (n < 0) {
                if (errno == EINTR) continue;
                detail::fail("recv");
            }
            dec_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        }
    }

private:
    detail::Fd fd_;
    FrameDecoder dec_;
};

} // namespace mwpipe::wire
