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

#include "falldet/transport/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "falldet/error.hpp"

namespace falldet::transport {
namespace {

using nlohmann::json;

std::string ssl_error() {
  const unsigned long code = ERR_get_error();
  if (code == 0) return "unknown TLS error";
  char buf[256];
  ERR_error_string_n(code, buf, sizeof(buf));
  return buf;
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

int connect_socket(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("resolve " + host + ": " + gai_strerror(rc));
  }
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (ready == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        if (ready == 0) errno = ETIMEDOUT;
        rc = -1;
      }
    }
    if (rc == 0) {
      fcntl(fd, F_SETFL, flags);
      set_nodelay(fd);
      freeaddrinfo(res);
      return fd;
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  freeaddrinfo(res);
  throw TransportError("connect " + host + ":" + service + ": " + last);
}

}  // namespace

const PeerInfo& PeerConfig::find(NodeId id) const {
  for (const PeerInfo& p : parties) {
    if (p.id == id) return p;
  }
  throw ConfigError("peer config has no party " + std::to_string(id));
}

PeerConfig PeerConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("peer config: ") + e.what());
  }
  PeerConfig cfg;
  try {
    cfg.tls = doc.value("tls", false);
    if (!doc.contains("parties") || !doc["parties"].is_array()) {
      throw ConfigError("peer config: 'parties' must be an array");
    }
    for (std::size_t i = 0; i < doc["parties"].size(); ++i) {
      const json& p = doc["parties"][i];
      const std::string path = "parties[" + std::to_string(i) + "]";
      if (!p.contains("id") || !p.contains("port")) {
        throw ConfigError("peer config: " + path + " needs 'id' and 'port'");
      }
      PeerInfo info;
      info.id = p["id"].get<NodeId>();
      info.port = p["port"].get<std::uint16_t>();
      info.host = p.value("host", std::string("127.0.0.1"));
      if (p.contains("cert") && !p["cert"].is_null()) info.cert = p["cert"].get<std::string>();
      if (info.id == kDeviceId) throw ConfigError("peer config: " + path + ": id 0 is the device");
      for (const PeerInfo& other : cfg.parties) {
        if (other.id == info.id) {
          throw ConfigError("peer config: " + path + ": duplicate id " + std::to_string(info.id));
        }
      }
      if (cfg.tls && info.cert.empty()) {
        throw ConfigError("peer config: " + path + ": TLS enabled but no 'cert'");
      }
      cfg.parties.push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("peer config: ") + e.what());
  }
  return cfg;
}

PeerConfig PeerConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open peer config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string PeerConfig::to_json_text() const {
  json doc;
  doc["tls"] = tls;
  doc["parties"] = json::array();
  for (const PeerInfo& p : parties) {
    json entry = {{"id", p.id}, {"host", p.host}, {"port", p.port}};
    entry["cert"] = p.cert.empty() ? json(nullptr) : json(p.cert);
    doc["parties"].push_back(entry);
  }
  return doc.dump(2);
}

std::string resolve_peer_config_path(const std::string& cli_path) {
  if (const char* env = std::getenv(kPeersEnv); env && *env) return env;
  return cli_path;
}

namespace {

// SSL_write has no MSG_NOSIGNAL; a peer that hung up must surface as an
// error, not kill the process.
void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::shared_ptr<TlsContext> TlsContext::server(const std::string& cert_path,
                                               const std::string& key_path) {
  ignore_sigpipe();
  SSL_CTX* ctx = SSL_CTX_new(TLS_server_method());
  if (!ctx) throw ConfigError("TLS: " + ssl_error());
  std::shared_ptr<TlsContext> out(new TlsContext(ctx));
  SSL_CTX_set_min_proto_version(ctx, TLS1_2_VERSION);
  if (SSL_CTX_use_certificate_chain_file(ctx, cert_path.c_str()) != 1) {
    throw ConfigError("TLS certificate " + cert_path + ": " + ssl_error());
  }
  if (SSL_CTX_use_PrivateKey_file(ctx, key_path.c_str(), SSL_FILETYPE_PEM) != 1) {
    throw ConfigError("TLS key " + key_path + ": " + ssl_error());
  }
  if (SSL_CTX_check_private_key(ctx) != 1) {
    throw ConfigError("TLS key " + key_path + " does not match " + cert_path);
  }
  return out;
}

std::shared_ptr<TlsContext> TlsContext::client(const std::vector<std::string>& trusted) {
  ignore_sigpipe();
  SSL_CTX* ctx = SSL_CTX_new(TLS_client_method());
  if (!ctx) throw ConfigError("TLS: " + ssl_error());
  std::shared_ptr<TlsContext> out(new TlsContext(ctx));
  SSL_CTX_set_min_proto_version(ctx, TLS1_2_VERSION);
  SSL_CTX_set_verify(ctx, SSL_VERIFY_PEER, nullptr);
  for (const std::string& path : trusted) {
    if (SSL_CTX_load_verify_locations(ctx, path.c_str(), nullptr) != 1) {
      throw ConfigError("TLS trusted certificate " + path + ": " + ssl_error());
    }
  }
  return out;
}

TlsContext::~TlsContext() { SSL_CTX_free(static_cast<SSL_CTX*>(ctx_)); }

std::shared_ptr<Connection> Connection::connect(const std::string& host, std::uint16_t port,
                                                const std::shared_ptr<TlsContext>& tls,
                                                std::chrono::milliseconds timeout) {
  const int fd = connect_socket(host, port, timeout);
  SSL* ssl = nullptr;
  if (tls) {
    ssl = SSL_new(static_cast<SSL_CTX*>(tls->native()));
    SSL_set_fd(ssl, fd);
    if (SSL_connect(ssl) != 1) {
      const std::string err = ssl_error();
      SSL_free(ssl);
      ::close(fd);
      throw TransportError("TLS handshake with " + host + ":" + std::to_string(port) + ": " + err);
    }
  }
  std::shared_ptr<Connection> conn(new Connection(fd, ssl));
  conn->tls_ = tls;
  return conn;
}

std::shared_ptr<Connection> Connection::accept_on(int fd, const std::shared_ptr<TlsContext>& tls) {
  set_nodelay(fd);
  SSL* ssl = nullptr;
  if (tls) {
    ssl = SSL_new(static_cast<SSL_CTX*>(tls->native()));
    SSL_set_fd(ssl, fd);
    if (SSL_accept(ssl) != 1) {
      const std::string err = ssl_error();
      SSL_free(ssl);
      ::close(fd);
      throw TransportError("TLS accept: " + err);
    }
  }
  std::shared_ptr<Connection> conn(new Connection(fd, ssl));
  conn->tls_ = tls;
  return conn;
}

Connection::~Connection() {
  close();
  if (ssl_) SSL_free(static_cast<SSL*>(ssl_));
  ::close(fd_);
}

void Connection::close() {
  if (closed_.exchange(true)) return;
  ::shutdown(fd_, SHUT_RDWR);
}

void Connection::write_all(const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    ssize_t n;
    if (ssl_) {
      n = SSL_write(static_cast<SSL*>(ssl_), data, static_cast<int>(size));
      if (n <= 0) throw TransportError("TLS write: " + ssl_error());
    } else {
      n = ::send(fd_, data, size, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send: ") + std::strerror(errno));
      }
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

bool Connection::read_exact(std::uint8_t* data, std::size_t size) {
  std::size_t got = 0;
  while (got < size) {
    ssize_t n;
    if (ssl_) {
      n = SSL_read(static_cast<SSL*>(ssl_), data + got, static_cast<int>(size - got));
      if (n <= 0) {
        const int err = SSL_get_error(static_cast<SSL*>(ssl_), static_cast<int>(n));
        if (err == SSL_ERROR_ZERO_RETURN || closed_) return false;
        if (err == SSL_ERROR_WANT_READ ||
            (err == SSL_ERROR_SYSCALL && (errno == EAGAIN || errno == EWOULDBLOCK))) {
          throw TimeoutError("receive timed out");
        }
        if (err == SSL_ERROR_SYSCALL && got == 0) return false;
        throw TransportError("TLS read: " + ssl_error());
      }
    } else {
      n = ::recv(fd_, data + got, size - got, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (closed_) return false;
        if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("receive timed out");
        throw TransportError(std::string("recv: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (got == 0) return false;
        throw TransportError("connection closed inside a frame");
      }
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void Connection::set_receive_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void Connection::send(const Envelope& e) {
  const auto bytes = frame(e);
  std::lock_guard lock(write_mu_);
  if (closed_) throw TransportError("send on closed connection");
  write_all(bytes.data(), bytes.size());
}

std::optional<Envelope> Connection::receive() {
  std::vector<std::uint8_t> buf(4);
  if (!read_exact(buf.data(), 4)) return std::nullopt;
  const std::size_t total = *frame_size(buf);
  buf.resize(total);
  if (!read_exact(buf.data() + 4, total - 4)) {
    throw TransportError("connection closed inside a frame");
  }
  return parse(buf);
}

TcpServer::TcpServer(const std::string& host, std::uint16_t port, Handler handler,
                     std::shared_ptr<TlsContext> tls)
    : handler_(std::move(handler)), tls_(std::move(tls)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string bind_host = host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw ConfigError("listen address must be an IPv4 literal: " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw TransportError("listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof(addr);
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::vector<std::thread> readers;
  {
    std::lock_guard lock(mu_);
    for (auto& c : connections_) c->close();
    readers.swap(readers_);
  }
  for (auto& t : readers) t.join();
  std::lock_guard lock(mu_);
  connections_.clear();
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    readers_.emplace_back([this, fd] {
      std::shared_ptr<Connection> conn;
      try {
        conn = Connection::accept_on(fd, tls_);
      } catch (const TransportError&) {
        return;
      }
      {
        std::lock_guard inner(mu_);
        if (stopping_) return;
        connections_.push_back(conn);
      }
      serve(conn);
    });
  }
}

void TcpServer::serve(std::shared_ptr<Connection> conn) {
  while (!stopping_) {
    std::optional<Envelope> e;
    try {
      e = conn->receive();
    } catch (const ParseError& err) {
      // Tell the peer why, then drop the stream: framing is lost.
      Envelope reply;
      reply.type = MsgType::kError;
      reply.note = err.what();
      try {
        conn->send(reply);
      } catch (const Error&) {
      }
      break;
    } catch (const Error&) {
      break;
    }
    if (!e) break;
    try {
      handler_(std::move(*e), conn);
    } catch (const Error&) {
      break;
    }
  }
  conn->close();
}

TcpTransport::TcpTransport(NodeId self, PeerConfig peers, std::shared_ptr<TlsContext> client_tls,
                           RetryPolicy retry)
    : self_(self), peers_(std::move(peers)), tls_(std::move(client_tls)), retry_(retry) {}

std::shared_ptr<Connection> TcpTransport::connection(NodeId to) {
  std::lock_guard lock(mu_);
  auto& slot = connections_[to];
  if (!slot || slot->closed()) {
    const PeerInfo& peer = peers_.find(to);
    slot = Connection::connect(peer.host, peer.port, tls_, retry_.connect_timeout);
  }
  return slot;
}

void TcpTransport::send(NodeId to, const Envelope& e) {
  std::string last;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry_.backoff * attempt);
    try {
      connection(to)->send(e);
      return;
    } catch (const TransportError& err) {
      last = err.what();
      std::lock_guard lock(mu_);
      if (auto it = connections_.find(to); it != connections_.end() && it->second) {
        it->second->close();
        it->second.reset();
      }
    }
  }
  throw TransportError("node " + std::to_string(self_) + " -> " + std::to_string(to) +
                       ": unreachable after " + std::to_string(retry_.attempts) +
                       " attempts: " + last);
}

}  // namespace falldet::transport
