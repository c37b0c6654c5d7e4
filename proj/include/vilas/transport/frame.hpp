#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace vilas::transport {

inline constexpr std::size_t kMaxPayload = 16u * 1024u * 1024u;

/// Message unit on every connection: {"t": type, "id": n, "body": {...}}.
/// `id` is omitted while zero and `body` while empty, so a bare ping
/// serializes as {"t":"ping"}.
struct Envelope {
  std::string t;
  std::uint64_t id = 0;
  nlohmann::json body = nlohmann::json::object();

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// Compact JSON text of an envelope (no whitespace, sorted keys).
std::string serialize(const Envelope& env);

/// Parses one payload. Throws protocol when the text is not a JSON object
/// with a string "t".
Envelope parse_envelope(std::string_view payload);

/// 4-byte big-endian length followed by the payload bytes.
std::string encode_frame(std::string_view payload);
inline std::string encode(const Envelope& env) { return encode_frame(serialize(env)); }

/// Incremental decoder. Accepts arbitrary fragmentation; partial trailing
/// bytes stay buffered until the rest arrives.
class FrameDecoder {
 public:
  /// Throws protocol as soon as a header declares more than kMaxPayload.
  void feed(std::string_view bytes);

  std::optional<std::string> next_payload();
  std::optional<Envelope> next();

  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  void extract();

  std::string buffer_;
  std::size_t offset_ = 0;
  std::deque<std::string> ready_;
};

}  // namespace vilas::transport
