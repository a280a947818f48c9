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

#ifndef FALLDET_TRANSPORT_TRANSPORT_HPP_
#define FALLDET_TRANSPORT_TRANSPORT_HPP_

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>

#include "falldet/mpc/channel.hpp"
#include "falldet/transport/envelope.hpp"

namespace falldet::transport {

// Sends envelopes to other nodes. Implementations are safe to call from
// several threads; each envelope is framed atomically.
class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError when `to` stays unreachable after bounded retries.
  virtual void send(NodeId to, const Envelope& e) = 0;
};

using Receiver = std::function<void(Envelope)>;

// Keyed inbox with idempotent delivery: a message key is accepted once.
// Error envelopes poison their session so that waiters fail promptly.
class Mailbox {
 public:
  // Returns false for a duplicate key.
  bool deliver(Envelope e);

  // Blocks until the message with `key` arrives. Throws TimeoutError, or
  // RemoteError when the session received an error envelope.
  Envelope wait(const MessageKey& key, std::chrono::milliseconds timeout);

  void fail(const SessionId& session, const std::string& reason);
  // Drops every stored message, seen key and failure of the session.
  void forget(const SessionId& session);

  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<MessageKey, Envelope> messages_;
  std::set<MessageKey> seen_;
  std::map<SessionId, std::string> failed_;
};

// An engine channel for one session: round messages travel as mpc_round
// envelopes and arrive through the node's mailbox.
class SessionChannel final : public mpc::Channel {
 public:
  SessionChannel(SessionId session, NodeId self, Transport& transport, Mailbox& mailbox,
                 std::chrono::milliseconds timeout);

  void send(shamir::PartyIndex to, const mpc::RoundMessage& msg) override;
  mpc::RoundMessage receive(shamir::PartyIndex from, std::uint64_t round) override;

 private:
  SessionId session_;
  NodeId self_;
  Transport& transport_;
  Mailbox& mailbox_;
  std::chrono::milliseconds timeout_;
};

}  // namespace falldet::transport

#endif  // FALLDET_TRANSPORT_TRANSPORT_HPP_
