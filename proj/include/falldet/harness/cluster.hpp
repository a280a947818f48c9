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


#ifndef FALLDET_HARNESS_CLUSTER_HPP_
#define FALLDET_HARNESS_CLUSTER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "falldet/device/client.hpp"
#include "falldet/party/service.hpp"
#include "falldet/transport/memory_bus.hpp"
#include "falldet/transport/tcp.hpp"

namespace falldet::harness {

enum class TransportMode { kMemory, kTcp };
std::string_view to_string(TransportMode mode);
TransportMode parse_transport_mode(std::string_view name);

struct ClusterOptions {
  TransportMode mode = TransportMode::kMemory;
  // Template for every party; the id is filled in.
  party::PartyConfig party;
  transport::BusOptions bus;
  // One log store per party in this directory; in-memory stores otherwise.
  std::optional<std::string> store_dir;
  // TLS between all nodes, with party<i>.crt / party<i>.key from this
  // directory (TCP mode only).
  std::optional<std::string> tls_dir;
  // Non-zero: session randomness derived from (seed, party, session) and a
  // seeded device, so runs are reproducible.
  std::uint64_t seed = 0;
  device::DeviceOptions device;
};

// Three parties and a device in one process, linked by an in-memory bus or
// by loopback TCP.
class LocalCluster {
 public:
  explicit LocalCluster(ClusterOptions options);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  const ClusterOptions& options() const { return options_; }
  device::DeviceClient& device() { return *device_; }
  party::PartyService& party(transport::NodeId id) { return *services_.at(id - 1); }
  std::size_t parties() const { return services_.size(); }
  // Null in TCP mode.
  transport::MemoryBus* bus() { return bus_.get(); }
  // Listening endpoints in TCP mode.
  const transport::PeerConfig& peers() const { return peers_; }

 private:
  class Forwarder;

  ClusterOptions options_;
  std::unique_ptr<transport::MemoryBus> bus_;
  std::vector<std::unique_ptr<party::ShareStore>> stores_;
  std::vector<std::unique_ptr<Forwarder>> forwarders_;
  std::vector<std::unique_ptr<transport::Transport>> transports_;
  std::vector<std::unique_ptr<party::PartyService>> services_;
  std::vector<std::unique_ptr<party::PartyServer>> servers_;
  transport::PeerConfig peers_;
  std::unique_ptr<RandomSource> device_rng_;
  std::unique_ptr<device::BusPort> port_;
  std::unique_ptr<device::DeviceClient> device_;
};

// Deterministic per-session randomness for seeded runs.
party::RandomFactory seeded_factory(std::uint64_t seed, transport::NodeId party);

}  // namespace falldet::harness

#endif  // FALLDET_HARNESS_CLUSTER_HPP_
