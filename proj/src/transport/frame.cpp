#include "vilas/transport/frame.hpp"

#include "vilas/error.hpp"

namespace vilas::transport {

using nlohmann::json;

std::string serialize(const Envelope& env) {
  json j = json::object();
  j["t"] = env.t;
  if (env.id != 0) j["id"] = env.id;
  if (!(env.body.is_object() && env.body.empty())) j["body"] = env.body;
  return j.dump();
}

Envelope parse_envelope(std::string_view payload) {
  json j = json::parse(payload.begin(), payload.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(Errc::protocol, "frame payload is not valid JSON");
  if (!j.is_object()) throw Error(Errc::protocol, "frame payload is not a JSON object");
  auto t = j.find("t");
  if (t == j.end() || !t->is_string()) throw Error(Errc::protocol, "frame payload lacks a string \"t\"");
  Envelope env;
  env.t = t->get<std::string>();
  if (auto id = j.find("id"); id != j.end()) {
    if (!id->is_number_unsigned() && !(id->is_number_integer() && id->get<std::int64_t>() >= 0)) {
      throw Error(Errc::protocol, "envelope id must be a non-negative integer");
    }
    env.id = id->get<std::uint64_t>();
  }
  if (auto body = j.find("body"); body != j.end()) env.body = std::move(*body);
  return env;
}

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxPayload) {
    throw Error(Errc::oversize, "payload of " + std::to_string(payload.size()) + " bytes exceeds 16 MiB");
  }
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) {
  buffer_.append(bytes);
  extract();
}

void FrameDecoder::extract() {
  while (buffer_.size() - offset_ >= 4) {
    const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data() + offset_);
    const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    if (n > kMaxPayload) {
      throw Error(Errc::protocol, "declared frame length " + std::to_string(n) + " exceeds 16 MiB");
    }
    if (buffer_.size() - offset_ < 4 + std::size_t{n}) break;
    ready_.emplace_back(buffer_.substr(offset_ + 4, n));
    offset_ += 4 + n;
  }
  // Compact once the consumed prefix dominates the buffer.
  if (offset_ > 0 && offset_ * 2 >= buffer_.size()) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
}

std::optional<std::string> FrameDecoder::next_payload() {
  if (ready_.empty()) return std::nullopt;
  std::string p = std::move(ready_.front());
  ready_.pop_front();
  return p;
}

std::optional<Envelope> FrameDecoder::next() {
  auto p = next_payload();
  if (!p) return std::nullopt;
  return parse_envelope(*p);
}

}  // namespace vilas::transport
