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


#ifndef FALLDET_TRANSPORT_PROTOCOL_HPP_
#define FALLDET_TRANSPORT_PROTOCOL_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace falldet::transport {

// `op` tags of ack envelopes.
inline constexpr const char* kOpStored = "stored";           // party -> device
inline constexpr const char* kOpAwaitLabel = "await_label";  // device -> party
inline constexpr const char* kOpReady = "ready";             // party -> party

// Sequence numbers of the ack envelopes a session uses.
inline constexpr std::uint64_t kSeqAwaitLabel = 1;
inline constexpr std::uint64_t kSeqReady = 2;

// Payload of a label_result envelope: the label and the party's cost
// report for the session.
struct LabelReport {
  int label = 0;
  std::uint64_t fe_rounds = 0;
  std::uint64_t in_rounds = 0;
  std::uint64_t open_rounds = 0;
  std::uint64_t fe_us = 0;
  std::uint64_t in_us = 0;
  std::uint64_t open_us = 0;

  std::uint64_t total_rounds() const { return fe_rounds + in_rounds + open_rounds; }
  std::vector<std::uint64_t> to_payload() const;
  // Throws ParseError on a payload of the wrong length or a non-bit label.
  static LabelReport from_payload(std::span<const std::uint64_t> words);
  bool operator==(const LabelReport&) const = default;
};

}  // namespace falldet::transport

#endif  // FALLDET_TRANSPORT_PROTOCOL_HPP_
