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

#ifndef FALLDET_MPC_CHANNEL_HPP_
#define FALLDET_MPC_CHANNEL_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "falldet/shamir.hpp"

namespace falldet::mpc {

using shamir::PartyIndex;

// One party-to-party message of a protocol round. `words` holds serialized
// field elements; `slot_begin`/`slot_count` name the result slots the
// round produces.
struct RoundMessage {
  std::uint64_t round = 0;
  std::string op;
  std::uint64_t slot_begin = 0;
  std::uint64_t slot_count = 0;
  std::vector<std::uint64_t> words;
};

// A party's session-scoped link to its peers.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(PartyIndex to, const RoundMessage& msg) = 0;
  // Blocks until the message of `round` from `from` is available.
  virtual RoundMessage receive(PartyIndex from, std::uint64_t round) = 0;
};

// In-process hub linking n parties directly; used by unit tests and the
// static round benchmark.
class LocalHub {
 public:
  explicit LocalHub(std::size_t parties,
                    std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~LocalHub();

  Channel& channel(PartyIndex party);

 private:
  class Endpoint;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

}  // namespace falldet::mpc

#endif  // FALLDET_MPC_CHANNEL_HPP_
