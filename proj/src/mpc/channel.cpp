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

#include "falldet/mpc/channel.hpp"

#include "falldet/error.hpp"

namespace falldet::mpc {

class LocalHub::Endpoint final : public Channel {
 public:
  Endpoint(LocalHub& hub, PartyIndex self, std::chrono::milliseconds timeout)
      : hub_(hub), self_(self), timeout_(timeout) {}

  void send(PartyIndex to, const RoundMessage& msg) override {
    if (to == 0 || to > hub_.endpoints_.size()) {
      throw TransportError("unknown party " + std::to_string(to));
    }
    hub_.endpoints_[to - 1]->deliver(self_, msg);
  }

  RoundMessage receive(PartyIndex from, std::uint64_t round) override {
    std::unique_lock lock(mu_);
    const auto key = std::make_pair(from, round);
    if (!cv_.wait_for(lock, timeout_, [&] { return inbox_.count(key) > 0; })) {
      throw TimeoutError("party " + std::to_string(self_) + " timed out waiting for round " +
                         std::to_string(round) + " from party " + std::to_string(from));
    }
    auto node = inbox_.extract(key);
    return std::move(node.mapped());
  }

  void deliver(PartyIndex from, const RoundMessage& msg) {
    {
      std::lock_guard lock(mu_);
      inbox_.emplace(std::make_pair(from, msg.round), msg);
    }
    cv_.notify_all();
  }

 private:
  LocalHub& hub_;
  PartyIndex self_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::pair<PartyIndex, std::uint64_t>, RoundMessage> inbox_;
};

LocalHub::LocalHub(std::size_t parties, std::chrono::milliseconds timeout) {
  for (std::size_t i = 0; i < parties; ++i) {
    endpoints_.push_back(
        std::make_unique<Endpoint>(*this, static_cast<PartyIndex>(i + 1), timeout));
  }
}

LocalHub::~LocalHub() = default;

Channel& LocalHub::channel(PartyIndex party) {
  if (party == 0 || party > endpoints_.size()) {
    throw TransportError("unknown party " + std::to_string(party));
  }
  return *endpoints_[party - 1];
}

}  // namespace falldet::mpc
