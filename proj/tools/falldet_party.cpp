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


#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli_common.hpp"
#include "falldet/error.hpp"

int main(int argc, char** argv) {
  using namespace falldet;
  CLI::App app{"falldet-party: one computing party"};
  transport::NodeId id = 1;
  std::string listen, peers_path, model, features = "derivative", classifier = "svm",
                                         store = "falldet-store", tls_cert, tls_key, timing_out,
                                         weights = "public";
  std::size_t window = features::kDefaultWindowSize;
  int ready_timeout_s = 30, session_timeout_s = 120;
  app.add_option("--party-id", id, "party index 1..3")->required();
  app.add_option("--listen", listen, "host:port to listen on")->required();
  app.add_option("--peers", peers_path, "peer table (FALLDET_PEERS overrides)");
  app.add_option("--model", model, "model file (default: bundled model)");
  app.add_option("--features", features, "smartfall|derivative");
  app.add_option("--classifier", classifier, "lr|svm|nb");
  app.add_option("--window", window, "samples per window");
  app.add_option("--weights", weights, "public|shared");
  app.add_option("--store", store, "directory for the share log");
  app.add_option("--tls-cert", tls_cert, "server certificate (PEM)");
  app.add_option("--tls-key", tls_key, "server private key (PEM)");
  app.add_option("--timing-out", timing_out, "per-session timing CSV");
  app.add_option("--ready-timeout", ready_timeout_s, "peer readiness timeout, seconds");
  app.add_option("--session-timeout", session_timeout_s, "session timeout, seconds");
  CLI11_PARSE(app, argc, argv);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    party::PartyConfig config = cli::party_config(features, classifier, model, window, weights);
    config.id = id;
    config.ready_timeout = std::chrono::seconds(ready_timeout_s);
    config.session_timeout = std::chrono::seconds(session_timeout_s);
    const std::string path = transport::resolve_peer_config_path(peers_path);
    if (path.empty()) throw ConfigError("no peer table: pass --peers or set FALLDET_PEERS");
    const transport::PeerConfig peers = transport::PeerConfig::load(path);
    if (peers.tls && (tls_cert.empty() || tls_key.empty())) {
      throw ConfigError("the peer table requires TLS: pass --tls-cert and --tls-key");
    }
    std::shared_ptr<transport::TlsContext> server_tls;
    if (!tls_cert.empty()) server_tls = transport::TlsContext::server(tls_cert, tls_key);

    std::filesystem::create_directories(store);
    party::LogStore log(store + "/party" + std::to_string(id) + ".ndjson");
    transport::TcpTransport outgoing(id, peers, cli::client_tls(peers));
    party::PartyService service(config, outgoing, log);
    const std::size_t skipped = service.recover();
    if (skipped > 0) std::cerr << "falldet-party: skipped " << skipped << " damaged records\n";

    std::ofstream timing;
    if (!timing_out.empty()) {
      const bool fresh = !std::filesystem::exists(timing_out);
      timing.open(timing_out, std::ios::app);
      if (fresh) party::PartyService::write_timing_header(timing);
      service.set_timing_sink(&timing);
    }

    const auto [host, port] = cli::parse_endpoint(listen);
    party::PartyServer server(service, host, port, server_tls);
    std::cout << "falldet-party " << id << " listening on " << host << ":" << server.port()
              << std::endl;

    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    service.drain();
    service.set_timing_sink(nullptr);
  } catch (const falldet::Error& e) {
    std::cerr << "falldet-party: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
