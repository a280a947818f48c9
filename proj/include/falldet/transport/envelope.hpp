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

#ifndef FALLDET_TRANSPORT_ENVELOPE_HPP_
#define FALLDET_TRANSPORT_ENVELOPE_HPP_

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "falldet/random.hpp"

namespace falldet::transport {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxPayloadBytes = std::size_t{1} << 20;
// Length prefix plus a generous bound on the JSON header around the payload.
inline constexpr std::size_t kMaxFrameBytes = kMaxPayloadBytes * 2;

// Node identifiers on the wire: 0 is the device, 1..n the parties.
using NodeId = std::uint32_t;
inline constexpr NodeId kDeviceId = 0;

using SessionId = std::array<std::uint8_t, 16>;

std::string to_hex(const SessionId& id);
// Throws ParseError unless `hex` is 32 hex digits.
SessionId parse_session_id(std::string_view hex);
SessionId random_session_id(RandomSource& rng);

enum class MsgType { kShareUpload, kMpcRound, kLabelResult, kAck, kError };

std::string_view to_string(MsgType type);
std::optional<MsgType> parse_msg_type(std::string_view name);

struct Envelope {
  int version = kProtocolVersion;
  SessionId session{};
  NodeId sender = kDeviceId;
  MsgType type = MsgType::kAck;
  std::uint64_t round = 0;
  // Sequence number within (session, sender, type, round).
  std::uint64_t seq = 0;
  // Operation tag: the MPC op of a round message, the acked message type...
  std::string op;
  std::uint64_t slot = 0;
  std::uint64_t slots = 0;
  // Set on the last upload of a session; parties start computing after it.
  bool complete = false;
  // Payload as 8-byte little-endian words.
  std::vector<std::uint64_t> payload;
  std::string note;

  bool operator==(const Envelope&) const = default;
};

struct MessageKey {
  SessionId session{};
  NodeId sender = 0;
  MsgType type = MsgType::kAck;
  std::uint64_t round = 0;
  std::uint64_t seq = 0;

  auto operator<=>(const MessageKey&) const = default;
};

MessageKey key_of(const Envelope& e);

// 4-byte big-endian length, then a JSON header carrying the base64 payload.
// Throws FrameError when the payload exceeds kMaxPayloadBytes.
std::vector<std::uint8_t> frame(const Envelope& e);

// Inverse of frame() over exactly one complete frame. Throws ParseError
// naming the offset or field at fault.
Envelope parse(std::span<const std::uint8_t> bytes);

// Total size of the frame starting at `bytes` once its length prefix is
// available; nullopt while fewer than 4 bytes are buffered. Throws ParseError
// when the declared length exceeds kMaxFrameBytes.
std::optional<std::size_t> frame_size(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Strict: canonical padding, no whitespace. Throws ParseError with the
// offending character offset.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace falldet::transport

#endif  // FALLDET_TRANSPORT_ENVELOPE_HPP_
