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

#include "falldet/transport/transport.hpp"

#include "falldet/error.hpp"

namespace falldet::transport {

bool Mailbox::deliver(Envelope e) {
  {
    std::lock_guard lock(mu_);
    const MessageKey key = key_of(e);
    if (!seen_.insert(key).second) return false;
    if (e.type == MsgType::kError) {
      failed_.emplace(e.session, "node " + std::to_string(e.sender) + ": " + e.note);
    }
    messages_.emplace(key, std::move(e));
  }
  cv_.notify_all();
  return true;
}

Envelope Mailbox::wait(const MessageKey& key, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto it = messages_.find(key); it != messages_.end()) {
      Envelope e = std::move(it->second);
      messages_.erase(it);
      return e;
    }
    if (auto f = failed_.find(key.session); f != failed_.end()) throw RemoteError(f->second);
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      if (messages_.count(key)) continue;
      throw TimeoutError("timed out waiting for " + std::string(to_string(key.type)) +
                         " round " + std::to_string(key.round) + " from node " +
                         std::to_string(key.sender) + " in session " + to_hex(key.session));
    }
  }
}

void Mailbox::fail(const SessionId& session, const std::string& reason) {
  {
    std::lock_guard lock(mu_);
    failed_.emplace(session, reason);
  }
  cv_.notify_all();
}

void Mailbox::forget(const SessionId& session) {
  std::lock_guard lock(mu_);
  auto in_session = [&](const MessageKey& k) { return k.session == session; };
  std::erase_if(messages_, [&](const auto& kv) { return in_session(kv.first); });
  std::erase_if(seen_, in_session);
  failed_.erase(session);
}

std::size_t Mailbox::pending() const {
  std::lock_guard lock(mu_);
  return messages_.size();
}

SessionChannel::SessionChannel(SessionId session, NodeId self, Transport& transport,
                               Mailbox& mailbox, std::chrono::milliseconds timeout)
    : session_(session), self_(self), transport_(transport), mailbox_(mailbox), timeout_(timeout) {}

void SessionChannel::send(shamir::PartyIndex to, const mpc::RoundMessage& msg) {
  Envelope e;
  e.session = session_;
  e.sender = self_;
  e.type = MsgType::kMpcRound;
  e.round = msg.round;
  e.op = msg.op;
  e.slot = msg.slot_begin;
  e.slots = msg.slot_count;
  e.payload = msg.words;
  transport_.send(to, e);
}

mpc::RoundMessage SessionChannel::receive(shamir::PartyIndex from, std::uint64_t round) {
  Envelope e = mailbox_.wait(MessageKey{session_, from, MsgType::kMpcRound, round, 0}, timeout_);
  return mpc::RoundMessage{e.round, std::move(e.op), e.slot, e.slots, std::move(e.payload)};
}

}  // namespace falldet::transport
