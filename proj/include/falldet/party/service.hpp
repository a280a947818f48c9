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


#ifndef FALLDET_PARTY_SERVICE_HPP_
#define FALLDET_PARTY_SERVICE_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "falldet/classifiers.hpp"
#include "falldet/features.hpp"
#include "falldet/mpc/engine.hpp"
#include "falldet/party/store.hpp"
#include "falldet/transport/protocol.hpp"
#include "falldet/transport/tcp.hpp"
#include "falldet/transport/transport.hpp"

namespace falldet::party {

enum class SessionStatus { kAwaitingData, kRunning, kDone, kFailed };
std::string_view to_string(SessionStatus status);

struct PartyConfig {
  transport::NodeId id = 1;
  FixedPointCodec codec{Field::mersenne127()};
  mpc::EngineOptions engine;
  features::FeatureKind feature_kind = features::FeatureKind::kDerivative;
  classifiers::ModelParams model;
  classifiers::InferenceOptions inference;
  std::size_t window_size = features::kDefaultWindowSize;
  std::chrono::milliseconds ready_timeout{30000};
  std::chrono::milliseconds session_timeout{120000};
  // Keep each session's opened values for inspection.
  bool keep_transcripts = false;
};

// Digest of everything the parties of a session must agree on: feature
// kind, classifier and model, window size and arithmetic parameters.
std::string config_hash(const PartyConfig& config);

struct SessionSummary {
  transport::SessionId session{};
  SessionStatus status = SessionStatus::kAwaitingData;
  std::size_t samples = 0;
  std::optional<transport::LabelReport> report;
  std::string reason;
  // Opened values, when PartyConfig::keep_transcripts is set.
  std::vector<mpc::OpenRecord> opens;
  std::uint64_t total_rounds = 0;
};

// The session program on one party's column of a window: feature
// extraction, inference and the opening of the label, with rounds and wall
// time recorded per phase ("fe", "in", "open").
transport::LabelReport evaluate_window(mpc::Engine& engine, std::span<const FieldElement> column,
                                       features::FeatureKind kind, std::size_t window_size,
                                       const classifiers::ModelParams& model,
                                       const classifiers::InferenceOptions& inference);

// Source of per-session protocol randomness.
using RandomFactory = std::function<std::unique_ptr<RandomSource>(const transport::SessionId&)>;

// One computing party. Envelopes from the device and from peers enter
// through handle(); MPC traffic leaves through `peers`. Every complete
// window runs as its own session on its own thread.
class PartyService {
 public:
  using Reply = std::function<void(const transport::Envelope&)>;

  PartyService(PartyConfig config, transport::Transport& peers, ShareStore& store,
               RandomFactory rng = nullptr);
  ~PartyService();
  PartyService(const PartyService&) = delete;
  PartyService& operator=(const PartyService&) = delete;

  const PartyConfig& config() const { return config_; }
  const std::string& hash() const { return hash_; }

  // Dispatches one envelope. Returns true when `reply` will be called
  // exactly once, possibly later from another thread (await_label).
  // Never blocks.
  bool handle(transport::Envelope e, const Reply& reply);

  // Rebuilds sessions from the store: finished sessions keep their outcome,
  // the rest return to awaiting_data. Returns the number of records skipped.
  std::size_t recover();

  std::optional<SessionSummary> session(const transport::SessionId& id) const;
  std::vector<SessionSummary> sessions() const;

  // Per-session timing CSV: session_id,fe_rounds,in_rounds,fe_ms,in_ms,label
  void set_timing_sink(std::ostream* out);
  static void write_timing_header(std::ostream& out);

  // Blocks until no session is running.
  void drain();

 private:
  struct Session;

  void handle_upload(const transport::Envelope& e, const Reply& reply);
  void handle_await(const transport::Envelope& e, const Reply& reply);
  void maybe_start(const std::shared_ptr<Session>& s);
  void run(std::shared_ptr<Session> s);
  transport::LabelReport execute(Session& s, std::vector<mpc::OpenRecord>* opens);
  void finish(Session& s, std::optional<transport::LabelReport> report, std::string reason);
  transport::Envelope error_reply(const transport::SessionId& session,
                                  const std::string& reason) const;
  void reap_locked();

  PartyConfig config_;
  std::string hash_;
  transport::Transport& peers_;
  ShareStore& store_;
  RandomFactory rng_;
  transport::Mailbox mailbox_;

  mutable std::mutex mu_;
  std::condition_variable idle_cv_;
  std::map<transport::SessionId, std::shared_ptr<Session>> sessions_;
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> finished;
  };
  std::list<Worker> workers_;
  std::size_t running_ = 0;

  std::mutex timing_mu_;
  std::ostream* timing_ = nullptr;
};

// Serves a PartyService over TCP: device requests are answered on their
// connection, peer messages are fed to the service.
class PartyServer {
 public:
  PartyServer(PartyService& service, const std::string& host, std::uint16_t port,
              std::shared_ptr<transport::TlsContext> tls = nullptr);
  std::uint16_t port() const { return server_.port(); }
  void stop() { server_.stop(); }

 private:
  PartyService& service_;
  transport::TcpServer server_;
};

}  // namespace falldet::party

#endif  // FALLDET_PARTY_SERVICE_HPP_
