#include <doctest.h>

#include <random>
#include <thread>

#include "support/generators.hpp"
#include "vilas/error.hpp"
#include "vilas/transport/client.hpp"
#include "vilas/transport/frame.hpp"
#include "vilas/transport/server.hpp"

using namespace vilas;
using namespace vilas::transport;

namespace {

std::string hex(const std::string& bytes) {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : bytes) {
    if (!out.empty()) out += ' ';
    out += digits[c >> 4];
    out += digits[c & 15];
  }
  return out;
}

Handler echo_handler() {
  return Router{}
      .on("ping", [](const nlohmann::json&, const RequestContext&) { return Envelope{"pong"}; })
      .on("echo", [](const nlohmann::json& body, const RequestContext&) { return Envelope{"echo", 0, body}; })
      .handler();
}

}  // namespace

TEST_CASE("encode: ping frame bytes") {
  const std::string bytes = encode(Envelope{"ping"});
  CHECK(hex(bytes) == "00 00 00 0C 7B 22 74 22 3A 22 70 69 6E 67 22 7D");
}

TEST_CASE("encode: empty object payload has a 2-byte header") {
  CHECK(hex(encode_frame("{}")) == "00 00 00 02 7B 7D");
}

TEST_CASE("encode rejects payloads above 16 MiB") {
  const std::string big(kMaxPayload + 1, 'x');
  try {
    encode_frame(big);
    FAIL("expected oversize");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::oversize);
  }
  CHECK_NOTHROW(encode_frame(std::string(kMaxPayload, 'x')));
}

TEST_CASE("property: decode(encode(m)) == m") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Envelope env = vilas::testing::random_envelope(rng);
    FrameDecoder dec;
    dec.feed(encode(env));
    const auto back = dec.next();
    REQUIRE(back.has_value());
    CHECK(*back == env);
    CHECK(dec.buffered() == 0);
  }
}

TEST_CASE("decode: one-byte reads and coalesced frames") {
  const Envelope a{"arm.state", 7, {{"q", {1, 2, 3}}}};
  const Envelope b{"ping", 8};
  const std::string a_bytes = encode(a);

  FrameDecoder dec;
  for (std::size_t i = 0; i + 1 < a_bytes.size(); ++i) {
    dec.feed(a_bytes.substr(i, 1));
    CHECK_FALSE(dec.next().has_value());
  }
  dec.feed(a_bytes.substr(a_bytes.size() - 1));
  CHECK(dec.next() == a);

  dec.feed(encode(a) + encode(b));
  CHECK(dec.next() == a);
  CHECK(dec.next() == b);
  CHECK_FALSE(dec.next().has_value());
}

TEST_CASE("decode: random fragmentation of 1000 envelopes") {
  std::mt19937_64 rng(2);
  std::vector<Envelope> sent;
  std::string stream;
  for (int i = 0; i < 1000; ++i) {
    sent.push_back(vilas::testing::random_envelope(rng));
    stream += encode(sent.back());
  }
  FrameDecoder dec;
  std::vector<Envelope> got;
  for (const auto& chunk : vilas::testing::random_chunks(rng, stream)) {
    dec.feed(chunk);
    while (auto e = dec.next()) got.push_back(*e);
  }
  CHECK(got == sent);
}

TEST_CASE("decode: protocol errors") {
  SUBCASE("declared length above 16 MiB") {
    FrameDecoder dec;
    try {
      dec.feed(std::string("\x01\x00\x00\x01", 4));
      FAIL("expected protocol error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::protocol);
    }
  }
  SUBCASE("payload not JSON") {
    FrameDecoder dec;
    dec.feed(encode_frame("{nope"));
    CHECK_THROWS_AS(dec.next(), Error);
  }
  SUBCASE("payload without type") {
    FrameDecoder dec;
    dec.feed(encode_frame("{}"));
    CHECK_THROWS_AS(dec.next(), Error);
  }
}

TEST_CASE("request/reply against an echo server") {
  Server server(Address{"127.0.0.1", 0}, echo_handler(), "echo");
  Client client(server.address());

  SUBCASE("ping gets pong with the same id") {
    const Envelope reply = client.request({"ping"}, Micros(1'000'000));
    CHECK(reply.t == "pong");
    CHECK(reply.id == 1);
  }
  SUBCASE("1000 sequential requests keep order") {
    for (std::uint64_t i = 1; i <= 1000; ++i) {
      const Envelope reply = client.request({"echo", 0, {{"n", i}}}, Micros(1'000'000));
      REQUIRE(reply.id == i);
      REQUIRE(reply.body.at("n").get<std::uint64_t>() == i);
    }
  }
  SUBCASE("unknown type yields an error reply") {
    const Envelope reply = client.request({"bogus"}, Micros(1'000'000));
    CHECK(reply.t == "error");
    CHECK(reply.body.at("code") == "unknown-type");
    CHECK_THROWS_AS(client.call("bogus", {}, Micros(1'000'000)), RemoteError);
  }
  SUBCASE("request after the server stops fails instead of hanging") {
    client.request({"ping"}, Micros(1'000'000));
    server.stop();
    try {
      client.request({"ping"}, Micros(2'000'000));
      FAIL("expected connection error");
    } catch (const Error& e) {
      CHECK((e.code() == Errc::connection || e.code() == Errc::timeout));
      CHECK(e.code() == Errc::connection);
    }
  }
}

TEST_CASE("client detects timeouts and mismatched reply ids") {
  Listener listener(Address{"127.0.0.1", 0});
  std::atomic<bool> wrong_id{false};
  std::thread rogue([&] {
    for (int round = 0; round < 2; ++round) {
      auto sock = listener.accept(Micros(5'000'000));
      if (!sock) return;
      FrameDecoder dec;
      char buf[4096];
      std::optional<Envelope> req;
      while (!req) {
        const auto n = sock->recv_some(buf, sizeof buf, Micros(5'000'000));
        if (n == 0) return;
        dec.feed({buf, n});
        req = dec.next();
      }
      if (wrong_id) {
        sock->send_all(encode(Envelope{"pong", req->id + 5}), Micros(1'000'000));
      }
      // else: never reply
      std::this_thread::sleep_for(std::chrono::milliseconds(300));
    }
  });
  Client client(Address{"127.0.0.1", listener.port()});
  try {
    client.request({"ping"}, Micros(100'000));
    FAIL("expected timeout");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::timeout);
  }
  wrong_id = true;
  try {
    client.request({"ping"}, Micros(1'000'000));
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::protocol);
  }
  rogue.join();
}

TEST_CASE("address parsing") {
  CHECK(Address::parse("127.0.0.1:5601").port == 5601);
  CHECK(Address::parse("tcp://10.0.0.2:5603").host == "10.0.0.2");
  CHECK(Address::parse("ws://localhost:5604/bridge").port == 5604);
  CHECK(Address::parse("5602").host == "127.0.0.1");
  CHECK_THROWS_AS(Address::parse("host:notaport"), Error);
}
