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


#include "falldet/harness/cluster.hpp"

#include <filesystem>

#include "falldet/digest.hpp"
#include "falldet/error.hpp"

namespace falldet::harness {

using transport::NodeId;

std::string_view to_string(TransportMode mode) {
  return mode == TransportMode::kMemory ? "memory" : "tcp";
}

TransportMode parse_transport_mode(std::string_view name) {
  if (name == "memory") return TransportMode::kMemory;
  if (name == "tcp") return TransportMode::kTcp;
  throw ConfigError("unknown transport mode '" + std::string(name) + "' (memory|tcp)");
}

party::RandomFactory seeded_factory(std::uint64_t seed, NodeId party) {
  return [seed, party](const transport::SessionId& session) -> std::unique_ptr<RandomSource> {
    Sha256 h;
    h.update_u64(seed);
    h.update_u64(party);
    h.update(std::span<const std::uint8_t>(session));
    const auto d = h.finish();
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s |= std::uint64_t{d[i]} << (8 * i);
    return std::make_unique<SeededRandom>(s);
  };
}

// Lets services be built before the transport they send through exists.
class LocalCluster::Forwarder final : public transport::Transport {
 public:
  void send(NodeId to, const transport::Envelope& e) override {
    if (!target) throw TransportError("transport not connected yet");
    target->send(to, e);
  }
  transport::Transport* target = nullptr;
};

LocalCluster::LocalCluster(ClusterOptions options) : options_(std::move(options)) {
  const std::size_t n = options_.party.engine.policy.parties;
  if (options_.mode == TransportMode::kMemory) {
    bus_ = std::make_unique<transport::MemoryBus>(options_.bus);
  }
  std::shared_ptr<transport::TlsContext> client_tls;
  if (options_.tls_dir) {
    if (options_.mode != TransportMode::kTcp) throw ConfigError("TLS requires TCP mode");
    std::vector<std::string> trusted;
    for (std::size_t p = 1; p <= n; ++p) {
      trusted.push_back(*options_.tls_dir + "/party" + std::to_string(p) + ".crt");
    }
    client_tls = transport::TlsContext::client(trusted);
  }

  for (NodeId p = 1; p <= n; ++p) {
    if (options_.store_dir) {
      std::filesystem::create_directories(*options_.store_dir);
      stores_.push_back(std::make_unique<party::LogStore>(
          *options_.store_dir + "/party" + std::to_string(p) + ".ndjson"));
    } else {
      stores_.push_back(std::make_unique<party::MemoryStore>());
    }
    forwarders_.push_back(std::make_unique<Forwarder>());
    party::PartyConfig config = options_.party;
    config.id = p;
    services_.push_back(std::make_unique<party::PartyService>(
        config, *forwarders_.back(), *stores_.back(),
        options_.seed ? seeded_factory(options_.seed, p) : nullptr));
  }

  if (bus_) {
    for (NodeId p = 1; p <= n; ++p) {
      party::PartyService* svc = services_[p - 1].get();
      transport::MemoryBus* bus = bus_.get();
      bus_->attach(p, [svc, bus, p](transport::Envelope e) {
        const NodeId to = e.sender;
        svc->handle(std::move(e), [bus, p, to](const transport::Envelope& r) {
          try {
            bus->send(p, to, r);
          } catch (const TransportError&) {
            // The requester detached.
          }
        });
      });
      transports_.push_back(bus_->endpoint(p));
      forwarders_[p - 1]->target = transports_.back().get();
    }
    port_ = std::make_unique<device::BusPort>(*bus_);
  } else {
    for (NodeId p = 1; p <= n; ++p) {
      std::shared_ptr<transport::TlsContext> server_tls;
      if (options_.tls_dir) {
        const std::string base = *options_.tls_dir + "/party" + std::to_string(p);
        server_tls = transport::TlsContext::server(base + ".crt", base + ".key");
      }
      servers_.push_back(
          std::make_unique<party::PartyServer>(*services_[p - 1], "127.0.0.1", 0, server_tls));
      transport::PeerInfo info{p, "127.0.0.1", servers_.back()->port(), ""};
      if (options_.tls_dir) info.cert = *options_.tls_dir + "/party" + std::to_string(p) + ".crt";
      peers_.parties.push_back(info);
    }
    peers_.tls = options_.tls_dir.has_value();
    for (NodeId p = 1; p <= n; ++p) {
      transports_.push_back(std::make_unique<transport::TcpTransport>(p, peers_, client_tls));
      forwarders_[p - 1]->target = transports_.back().get();
    }
  }

  std::vector<std::unique_ptr<device::PartyLink>> links;
  if (port_) {
    for (NodeId p = 1; p <= n; ++p) links.push_back(port_->link(p));
  } else {
    links = device::tcp_links(peers_, client_tls);
  }
  if (options_.seed) {
    device_rng_ = std::make_unique<SeededRandom>(options_.seed);
  } else {
    device_rng_ = std::make_unique<SystemRandom>();
  }
  device_ = std::make_unique<device::DeviceClient>(options_.party.codec, std::move(links),
                                                   *device_rng_, options_.device);
}

LocalCluster::~LocalCluster() {
  device_.reset();
  port_.reset();
  if (bus_) {
    for (NodeId p = 1; p <= services_.size(); ++p) bus_->detach(p);
  }
  for (auto& s : servers_) s->stop();
  services_.clear();
  servers_.clear();
}

}  // namespace falldet::harness
