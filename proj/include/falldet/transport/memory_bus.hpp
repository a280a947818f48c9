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

#ifndef FALLDET_TRANSPORT_MEMORY_BUS_HPP_
#define FALLDET_TRANSPORT_MEMORY_BUS_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <random>
#include <thread>
#include <vector>

#include "falldet/transport/transport.hpp"

namespace falldet::transport {

struct BusOptions {
  // Added to every frame, in both directions.
  std::chrono::microseconds delay{0};
  // Per-link delay; replaces `delay` when set.
  std::function<std::chrono::microseconds(NodeId from, NodeId to)> link_delay;
  // Extra uniformly random delay in [0, jitter]; FIFO per link is kept.
  std::chrono::microseconds jitter{0};
  // Probability that a frame is delivered a second time.
  double duplicate_rate = 0;
  std::uint64_t seed = 1;
};

// In-process network. Every envelope is framed and parsed on the way, then
// handed to the destination's receiver on the bus thread, in due-time order.
class MemoryBus {
 public:
  explicit MemoryBus(BusOptions options = {});
  ~MemoryBus();
  MemoryBus(const MemoryBus&) = delete;
  MemoryBus& operator=(const MemoryBus&) = delete;

  void attach(NodeId node, Receiver receiver);
  // Once detach returns, the node's receiver is no longer running.
  void detach(NodeId node);

  // Throws TransportError when `to` is not attached.
  void send(NodeId from, NodeId to, const Envelope& e);

  // A Transport that sends as `self`.
  std::unique_ptr<Transport> endpoint(NodeId self);

  std::uint64_t frames_sent() const;
  std::uint64_t bytes_sent() const;

 private:
  struct Pending {
    std::chrono::steady_clock::time_point due;
    std::uint64_t order;
    NodeId to;
    std::vector<std::uint8_t> bytes;
    bool operator>(const Pending& o) const {
      return due != o.due ? due > o.due : order > o.order;
    }
  };

  void run();

  BusOptions options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<NodeId, Receiver> receivers_;
  std::map<std::pair<NodeId, NodeId>, std::chrono::steady_clock::time_point> last_due_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::mt19937_64 rng_;
  std::uint64_t order_ = 0;
  std::uint64_t frames_ = 0;
  std::uint64_t bytes_ = 0;
  bool stop_ = false;
  bool delivering_ = false;
  NodeId delivering_to_ = 0;
  std::thread thread_;
};

}  // namespace falldet::transport

#endif  // FALLDET_TRANSPORT_MEMORY_BUS_HPP_
