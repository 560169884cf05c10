#include <catch_amalgamated.hpp>

#include "mwpipe/wire.hpp"

#include <random>
#include <thread>

using namespace mwpipe;

TEST_CASE("frames carry a big-endian length prefix") {
    const auto f = wire::encode_frame("abc");
    REQUIRE(f.size() == 7);
    CHECK(f.substr(0, 4) == std::string("\0\0\0\x03", 4));
    CHECK(f.substr(4) == "abc");
    CHECK(wire::encode_frame(std::string(300, 'x')).substr(0, 4) == std::string("\0\0\x01\x2c", 4));
}

TEST_CASE("the decoder reassembles frames split at any byte") {
    std::mt19937_64 rng(4);
    std::vector<std::string> sent;
    std::string stream;
    for (int i = 0; i < 200; ++i) {
        std::string s(rng() % 70, '\0');
        for (auto& c : s) c = static_cast<char>(rng() % 256);
        stream += wire::encode_frame(s);
        sent.push_back(std::move(s));
    }
    wire::FrameDecoder dec;
    std::vector<std::string> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        const std::size_t n = std::min<std::size_t>(1 + rng() % 13, stream.size() - pos);
        dec.feed(std::string_view(stream).substr(pos, n));
        pos += n;
        while (auto f = dec.next()) got.push_back(*f);
    }
    CHECK(got == sent);
    CHECK_FALSE(dec.next());
}

TEST_CASE("endpoints parse host and port") {
    const auto a = wire::parse_endpoint("0.0.0.0:9000");
    CHECK(a.host == "0.0.0.0");
    CHECK(a.port == 9000);
    const auto b = wire::parse_endpoint(":7");
    CHECK(b.host == "127.0.0.1");
    CHECK(b.port == 7);
    CHECK_THROWS_AS(wire::parse_endpoint("localhost"), Error);
    CHECK_THROWS_AS(wire::parse_endpoint("h:70000"), Error);
    CHECK_THROWS_AS(wire::parse_endpoint("h:12x"), Error);
}

TEST_CASE("a client receives every frame over loopback") {
    wire::Server server(wire::parse_endpoint("127.0.0.1:0"));
    const auto port = server.port();
    REQUIRE(port != 0);
    std::vector<std::string> payloads{"{\"format\":\"MWBAG1\"}", std::string(100'000, 'y'), "", "{\"t\":1}"};

    std::thread producer([&] {
        server.accept_one();
        for (const auto& p : payloads) server.send(p);
        server.close_client();
    });
    wire::Client client({"127.0.0.1", port});
    std::vector<std::string> got;
    while (auto f = client.read_frame()) got.push_back(*f);
    producer.join();
    CHECK(got == payloads);
}
