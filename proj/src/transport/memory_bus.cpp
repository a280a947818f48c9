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

#include "falldet/transport/memory_bus.hpp"

#include <iostream>

#include "falldet/error.hpp"

namespace falldet::transport {
namespace {

class BusEndpoint final : public Transport {
 public:
  BusEndpoint(MemoryBus& bus, NodeId self) : bus_(bus), self_(self) {}
  void send(NodeId to, const Envelope& e) override { bus_.send(self_, to, e); }

 private:
  MemoryBus& bus_;
  NodeId self_;
};

}  // namespace

MemoryBus::MemoryBus(BusOptions options)
    : options_(options), rng_(options.seed), thread_([this] { run(); }) {}

MemoryBus::~MemoryBus() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void MemoryBus::attach(NodeId node, Receiver receiver) {
  std::lock_guard lock(mu_);
  receivers_[node] = std::move(receiver);
}

void MemoryBus::detach(NodeId node) {
  std::unique_lock lock(mu_);
  receivers_.erase(node);
  // Let a delivery already handed to the receiver finish first.
  if (std::this_thread::get_id() != thread_.get_id()) {
    cv_.wait(lock, [&] { return !delivering_ || delivering_to_ != node; });
  }
}

std::unique_ptr<Transport> MemoryBus::endpoint(NodeId self) {
  return std::make_unique<BusEndpoint>(*this, self);
}

void MemoryBus::send(NodeId from, NodeId to, const Envelope& e) {
  auto bytes = frame(e);
  {
    std::lock_guard lock(mu_);
    if (!receivers_.count(to)) {
      throw TransportError("node " + std::to_string(to) + " is not attached to the bus");
    }
    auto due = std::chrono::steady_clock::now() +
               (options_.link_delay ? options_.link_delay(from, to) : options_.delay);
    if (options_.jitter.count() > 0) {
      std::uniform_int_distribution<std::int64_t> extra(0, options_.jitter.count());
      due += std::chrono::microseconds(extra(rng_));
    }
    auto& last = last_due_[{from, to}];
    if (due < last) due = last;
    last = due;
    const bool duplicate =
        options_.duplicate_rate > 0 &&
        std::uniform_real_distribution<double>(0, 1)(rng_) < options_.duplicate_rate;
    ++frames_;
    bytes_ += bytes.size();
    if (duplicate) queue_.push(Pending{due, order_++, to, bytes});
    queue_.push(Pending{due, order_++, to, std::move(bytes)});
  }
  cv_.notify_all();
}

std::uint64_t MemoryBus::frames_sent() const {
  std::lock_guard lock(mu_);
  return frames_;
}

std::uint64_t MemoryBus::bytes_sent() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

void MemoryBus::run() {
  std::unique_lock lock(mu_);
  while (true) {
    if (stop_) return;
    if (queue_.empty()) {
      cv_.wait(lock);
      continue;
    }
    const auto due = queue_.top().due;
    if (std::chrono::steady_clock::now() < due) {
      cv_.wait_until(lock, due);
      continue;
    }
    Pending p = queue_.top();
    queue_.pop();
    auto it = receivers_.find(p.to);
    if (it == receivers_.end()) continue;
    Receiver receiver = it->second;
    delivering_ = true;
    delivering_to_ = p.to;
    lock.unlock();
    try {
      receiver(parse(p.bytes));
    } catch (const std::exception& e) {
      std::clog << "falldet: bus delivery to node " << p.to << " failed: " << e.what() << "\n";
    }
    lock.lock();
    delivering_ = false;
    cv_.notify_all();
  }
}

}  // namespace falldet::transport
