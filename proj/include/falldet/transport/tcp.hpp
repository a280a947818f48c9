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

#ifndef FALLDET_TRANSPORT_TCP_HPP_
#define FALLDET_TRANSPORT_TCP_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "falldet/transport/transport.hpp"

namespace falldet::transport {

struct PeerInfo {
  NodeId id = 0;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  // PEM certificate the peer presents; used as the trust anchor with TLS.
  std::string cert;
};

// Static party table: {"tls": false, "parties": [{"id", "host", "port", "cert"}]}.
struct PeerConfig {
  std::vector<PeerInfo> parties;
  bool tls = false;

  // Throws ConfigError for unknown ids.
  const PeerInfo& find(NodeId id) const;

  static PeerConfig from_json_text(const std::string& text);
  static PeerConfig load(const std::string& path);
  std::string to_json_text() const;
};

inline constexpr const char* kPeersEnv = "FALLDET_PEERS";

// The path in FALLDET_PEERS when set, else `cli_path`.
std::string resolve_peer_config_path(const std::string& cli_path);

// Owns an OpenSSL context. Servers present cert/key; clients trust the
// peer's certificate file.
class TlsContext {
 public:
  static std::shared_ptr<TlsContext> server(const std::string& cert_path,
                                            const std::string& key_path);
  static std::shared_ptr<TlsContext> client(const std::vector<std::string>& trusted_cert_paths);
  ~TlsContext();
  TlsContext(const TlsContext&) = delete;
  TlsContext& operator=(const TlsContext&) = delete;

  void* native() const { return ctx_; }

 private:
  explicit TlsContext(void* ctx) : ctx_(ctx) {}
  void* ctx_;
};

// One framed, bidirectional stream. send() is atomic per envelope and may be
// called from several threads, but never concurrently with receive(): TLS
// streams do not support that, so a connection is either write-only or
// driven by a single thread.
class Connection {
 public:
  // Throws TransportError on failure.
  static std::shared_ptr<Connection> connect(const std::string& host, std::uint16_t port,
                                             const std::shared_ptr<TlsContext>& tls,
                                             std::chrono::milliseconds timeout);
  static std::shared_ptr<Connection> accept_on(int fd, const std::shared_ptr<TlsContext>& tls);
  ~Connection();

  void send(const Envelope& e);
  // nullopt on orderly close; throws ParseError on a bad frame and
  // TransportError on socket failure.
  std::optional<Envelope> receive();
  // Later receive() calls throw TimeoutError after `timeout` of silence.
  void set_receive_timeout(std::chrono::milliseconds timeout);
  void close();
  bool closed() const { return closed_; }

 private:
  Connection(int fd, void* ssl) : fd_(fd), ssl_(ssl) {}
  void write_all(const std::uint8_t* data, std::size_t size);
  bool read_exact(std::uint8_t* data, std::size_t size);

  int fd_;
  void* ssl_;
  std::shared_ptr<TlsContext> tls_;
  std::mutex write_mu_;
  std::atomic<bool> closed_{false};
};

// Accepts connections and hands every received envelope, with the
// connection it came from, to the handler. Each connection has one reader
// thread; the handler runs on it and replies on the same thread.
class TcpServer {
 public:
  using Handler = std::function<void(Envelope, const std::shared_ptr<Connection>&)>;

  TcpServer(const std::string& host, std::uint16_t port, Handler handler,
            std::shared_ptr<TlsContext> tls = nullptr);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  // The bound port (useful with port 0).
  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  Handler handler_;
  std::shared_ptr<TlsContext> tls_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> readers_;
};

struct RetryPolicy {
  int attempts = 5;
  std::chrono::milliseconds backoff{50};
  std::chrono::milliseconds connect_timeout{2000};
};

// Party-to-party transport: one write-only outgoing connection per peer,
// re-established and the envelope re-sent on failure. Receivers deduplicate.
class TcpTransport final : public Transport {
 public:
  TcpTransport(NodeId self, PeerConfig peers, std::shared_ptr<TlsContext> client_tls = nullptr,
               RetryPolicy retry = {});
  void send(NodeId to, const Envelope& e) override;

 private:
  std::shared_ptr<Connection> connection(NodeId to);

  NodeId self_;
  PeerConfig peers_;
  std::shared_ptr<TlsContext> tls_;
  RetryPolicy retry_;
  std::mutex mu_;
  std::map<NodeId, std::shared_ptr<Connection>> connections_;
};

}  // namespace falldet::transport

#endif  // FALLDET_TRANSPORT_TCP_HPP_
