/*
 * Copyright 2026 The FallDet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "falldet/transport/envelope.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include "falldet/digest.hpp"
#include "falldet/error.hpp"

namespace falldet::transport {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kTypeNames = {"share_upload", "mpc_round",
                                                        "label_result", "ack", "error"};

bool is_base64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
         c == '+' || c == '/';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <typename T>
T get_field(const json& header, const char* name, bool required = true, T fallback = T{}) {
  auto it = header.find(name);
  if (it == header.end()) {
    if (required) throw ParseError(std::string("frame header: missing field '") + name + "'");
    return fallback;
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("frame header: field '") + name + "' has the wrong type");
  }
}

}  // namespace

std::string to_hex(const SessionId& id) { return falldet::to_hex(id); }

SessionId parse_session_id(std::string_view hex) {
  if (hex.size() != 32) throw ParseError("session id must be 32 hex digits");
  SessionId id{};
  for (std::size_t i = 0; i < 16; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ParseError("session id: bad hex digit at " + std::to_string(2 * i));
    id[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return id;
}

SessionId random_session_id(RandomSource& rng) {
  SessionId id{};
  for (std::size_t i = 0; i < 16; i += 8) {
    const std::uint64_t v = rng.next_u64();
    for (std::size_t b = 0; b < 8; ++b) id[i + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
  return id;
}

std::string_view to_string(MsgType type) { return kTypeNames[static_cast<std::size_t>(type)]; }

std::optional<MsgType> parse_msg_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<MsgType>(i);
  }
  return std::nullopt;
}

MessageKey key_of(const Envelope& e) { return MessageKey{e.session, e.sender, e.type, e.round, e.seq}; }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw ParseError("base64: length " + std::to_string(text.size()) + " is not a multiple of 4");
  }
  std::size_t padding = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') {
      // Padding only in the last two positions, and nothing after it.
      if (i + 2 < text.size() || (i + 1 < text.size() && text[i + 1] != '=')) {
        throw ParseError("base64: misplaced padding at offset " + std::to_string(i));
      }
      ++padding;
    } else if (!is_base64_char(c)) {
      throw ParseError("base64: invalid character at offset " + std::to_string(i));
    }
  }
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  if (text.empty()) return out;
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParseError("base64: decoding failed");
  out.resize(static_cast<std::size_t>(n) - padding);
  // Reject non-canonical encodings whose padding bits are set.
  if (padding > 0) {
    const char last = text[text.size() - padding - 1];
    const int v = last >= 'A' && last <= 'Z'   ? last - 'A'
                  : last >= 'a' && last <= 'z' ? last - 'a' + 26
                  : last >= '0' && last <= '9' ? last - '0' + 52
                  : last == '+'                ? 62
                                               : 63;
    if ((v & (padding == 1 ? 0x3 : 0xF)) != 0) throw ParseError("base64: non-canonical encoding");
  }
  return out;
}

std::vector<std::uint8_t> frame(const Envelope& e) {
  const std::size_t payload_bytes = e.payload.size() * 8;
  if (payload_bytes > kMaxPayloadBytes) {
    throw FrameError("payload of " + std::to_string(payload_bytes) + " bytes exceeds the " +
                     std::to_string(kMaxPayloadBytes) + "-byte cap");
  }
  json header = {{"v", e.version},
                 {"session", to_hex(e.session)},
                 {"sender", e.sender},
                 {"type", std::string(to_string(e.type))},
                 {"round", e.round},
                 {"seq", e.seq},
                 {"count", e.payload.size()}};
  if (!e.op.empty()) header["op"] = e.op;
  if (e.slot != 0) header["slot"] = e.slot;
  if (e.slots != 0) header["slots"] = e.slots;
  if (e.complete) header["complete"] = true;
  if (!e.note.empty()) header["note"] = e.note;
  std::string text = header.dump();
  if (!e.payload.empty()) {
    std::vector<std::uint8_t> raw(payload_bytes);
    for (std::size_t i = 0; i < e.payload.size(); ++i) {
      for (int b = 0; b < 8; ++b) raw[8 * i + b] = static_cast<std::uint8_t>(e.payload[i] >> (8 * b));
    }
    // Spliced in at its sorted key position; base64 needs no escaping, so
    // this is byte-identical to dumping the payload with the header.
    const auto at = text.rfind(",\"round\":") + 1;
    text.insert(at, "\"payload\":\"" + base64_encode(raw) + "\",");
  }
  std::vector<std::uint8_t> out(4 + text.size());
  const auto len = static_cast<std::uint32_t>(text.size());
  out[0] = static_cast<std::uint8_t>(len >> 24);
  out[1] = static_cast<std::uint8_t>(len >> 16);
  out[2] = static_cast<std::uint8_t>(len >> 8);
  out[3] = static_cast<std::uint8_t>(len);
  std::copy(text.begin(), text.end(), out.begin() + 4);
  return out;
}

std::optional<std::size_t> frame_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  const std::size_t len = (std::size_t{bytes[0]} << 24) | (std::size_t{bytes[1]} << 16) |
                          (std::size_t{bytes[2]} << 8) | std::size_t{bytes[3]};
  if (len > kMaxFrameBytes) {
    throw ParseError("frame length " + std::to_string(len) + " at offset 0 exceeds the cap");
  }
  return 4 + len;
}

Envelope parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw ParseError("truncated frame: " + std::to_string(bytes.size()) +
                     " bytes, length prefix needs 4");
  }
  const std::size_t total = *frame_size(bytes);
  if (bytes.size() < total) {
    throw ParseError("truncated frame: length prefix declares " + std::to_string(total - 4) +
                     " header bytes, " + std::to_string(bytes.size() - 4) + " present");
  }
  if (bytes.size() > total) {
    throw ParseError("frame length mismatch: " + std::to_string(bytes.size() - total) +
                     " bytes after offset " + std::to_string(total));
  }
  // Lift a plain payload string out before the JSON parse; a quote can only
  // appear escaped inside other strings, so the match is the real key.
  std::string_view text(reinterpret_cast<const char*>(bytes.data()) + 4, total - 4);
  std::string_view lifted;
  std::size_t lifted_at = std::string_view::npos;
  std::string rest;
  constexpr std::string_view kKey = "\"payload\":\"";
  if (const auto k = text.find(kKey); k != std::string_view::npos) {
    const auto start = k + kKey.size();
    auto end = start;
    while (end < text.size() && text[end] != '"' && text[end] != '\\') ++end;
    if (end < text.size() && text[end] == '"' && end > start) {
      lifted = text.substr(start, end - start);
      lifted_at = start;
      rest.reserve(text.size() - lifted.size());
      rest.append(text.substr(0, start)).append(text.substr(end));
      text = rest;
    }
  }
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& err) {
    const std::size_t at =
        lifted_at != std::string_view::npos && err.byte > lifted_at ? err.byte + lifted.size()
                                                                    : err.byte;
    throw ParseError("truncated or malformed header at offset " + std::to_string(4 + at) + ": " +
                     err.what());
  }
  if (!header.is_object()) throw ParseError("frame header is not a JSON object");

  Envelope e;
  e.version = get_field<int>(header, "v");
  if (e.version != kProtocolVersion) {
    throw ParseError("frame header: version " + std::to_string(e.version) + " unsupported (expected " +
                     std::to_string(kProtocolVersion) + ")");
  }
  e.session = parse_session_id(get_field<std::string>(header, "session"));
  e.sender = get_field<NodeId>(header, "sender");
  const auto type_name = get_field<std::string>(header, "type");
  const auto type = parse_msg_type(type_name);
  if (!type) throw ParseError("frame header: unknown msg_type '" + type_name + "'");
  e.type = *type;
  e.round = get_field<std::uint64_t>(header, "round");
  e.seq = get_field<std::uint64_t>(header, "seq");
  e.op = get_field<std::string>(header, "op", false);
  e.slot = get_field<std::uint64_t>(header, "slot", false);
  e.slots = get_field<std::uint64_t>(header, "slots", false);
  e.complete = get_field<bool>(header, "complete", false);
  e.note = get_field<std::string>(header, "note", false);
  const auto count = get_field<std::uint64_t>(header, "count");
  auto encoded = get_field<std::string>(header, "payload", false);
  if (!lifted.empty()) {
    // A second payload key would have replaced the lifted one.
    if (!encoded.empty()) throw ParseError("frame header: duplicate field 'payload'");
    encoded = lifted;
  }
  std::vector<std::uint8_t> raw;
  try {
    raw = base64_decode(encoded);
  } catch (const ParseError& err) {
    throw ParseError(std::string("frame header: field 'payload': ") + err.what());
  }
  if (raw.size() != count * 8) {
    throw ParseError("frame header: payload has " + std::to_string(raw.size()) +
                     " bytes, count declares " + std::to_string(count) + " 8-byte values");
  }
  e.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t w = 0;
    for (int b = 0; b < 8; ++b) w |= std::uint64_t{raw[8 * i + b]} << (8 * b);
    e.payload[i] = w;
  }
  return e;
}

}  // namespace falldet::transport
