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


#include "falldet/party/service.hpp"

#include <algorithm>
#include <future>
#include <iomanip>
#include <iostream>

#include <json.hpp>

#include "falldet/digest.hpp"
#include "falldet/error.hpp"

namespace falldet::party {

using transport::Envelope;
using transport::LabelReport;
using transport::MsgType;
using transport::SessionId;

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::kAwaitingData:
      return "awaiting_data";
    case SessionStatus::kRunning:
      return "running";
    case SessionStatus::kDone:
      return "done";
    case SessionStatus::kFailed:
      return "failed";
  }
  return "?";
}

std::string config_hash(const PartyConfig& c) {
  nlohmann::json j;
  j["features"] = features::to_string(c.feature_kind);
  j["classifier"] = classifiers::to_string(c.model.kind);
  j["model"] = classifiers::model_digest(c.model);
  j["weights"] = c.inference.weights == classifiers::WeightMode::kPublic ? "public" : "shared";
  j["window"] = c.window_size;
  j["field_bits"] = c.codec.field().bits();
  const u128 p = c.codec.field().modulus();
  j["modulus"] = {static_cast<std::uint64_t>(p >> 64), static_cast<std::uint64_t>(p)};
  j["frac_bits"] = c.codec.frac_bits();
  j["int_bits"] = c.codec.int_bits();
  j["kappa"] = c.engine.kappa;
  j["parties"] = c.engine.policy.parties;
  j["degree"] = c.engine.policy.degree;
  j["sqrt"] = {c.engine.sqrt.lower, c.engine.sqrt.upper, c.engine.sqrt.iterations};
  j["bit_source"] = static_cast<int>(c.engine.bit_source);
  return sha256_hex(j.dump());
}

struct PartyService::Session {
  SessionId id{};
  SessionStatus status = SessionStatus::kAwaitingData;
  std::map<std::uint64_t, StoredUpload> chunks;
  bool complete = false;
  std::optional<LabelReport> report;
  std::string reason;
  std::vector<Reply> waiters;
  std::vector<mpc::OpenRecord> opens;
  std::uint64_t total_rounds = 0;

  std::size_t samples() const {
    std::size_t n = 0;
    for (const auto& [slot, c] : chunks) n += c.slots;
    return n;
  }
};

PartyService::PartyService(PartyConfig config, transport::Transport& peers, ShareStore& store,
                           RandomFactory rng)
    : config_(std::move(config)),
      hash_(config_hash(config_)),
      peers_(peers),
      store_(store),
      rng_(std::move(rng)) {
  config_.engine.policy.validate();
  if (config_.id < 1 || config_.id > config_.engine.policy.parties) {
    throw ConfigError("party id " + std::to_string(config_.id) + " outside 1.." +
                      std::to_string(config_.engine.policy.parties));
  }
  if (config_.model.feature_kind != config_.feature_kind) {
    throw ConfigError("model was built for " +
                      std::string(features::to_string(config_.model.feature_kind)) +
                      " features, service runs " +
                      std::string(features::to_string(config_.feature_kind)));
  }
  if (config_.model.dimension != features::feature_dimension(config_.feature_kind,
                                                             config_.window_size)) {
    throw ConfigError("model dimension does not match the feature dimension");
  }
}

PartyService::~PartyService() {
  std::list<Worker> workers;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      if (s->status == SessionStatus::kRunning) mailbox_.fail(id, "party shutting down");
    }
    workers.swap(workers_);
  }
  for (Worker& w : workers) w.thread.join();
}

Envelope PartyService::error_reply(const SessionId& session, const std::string& reason) const {
  Envelope e;
  e.session = session;
  e.sender = config_.id;
  e.type = MsgType::kError;
  e.note = reason;
  return e;
}

bool PartyService::handle(Envelope e, const Reply& reply) {
  const bool from_device = e.sender == transport::kDeviceId;
  switch (e.type) {
    case MsgType::kShareUpload:
      if (!from_device) break;
      handle_upload(e, reply);
      return true;
    case MsgType::kAck:
      if (from_device && e.op == transport::kOpAwaitLabel) {
        handle_await(e, reply);
        return true;
      }
      if (!from_device && e.op == transport::kOpReady) mailbox_.deliver(std::move(e));
      return false;
    case MsgType::kMpcRound:
    case MsgType::kError:
      if (!from_device) mailbox_.deliver(std::move(e));
      return false;
    case MsgType::kLabelResult:
      break;
  }
  if (from_device) {
    reply(error_reply(e.session, "unexpected " + std::string(transport::to_string(e.type)) +
                                     " from the device"));
    return true;
  }
  return false;
}

void PartyService::handle_upload(const Envelope& e, const Reply& reply) {
  const std::size_t per_sample = 3 * config_.codec.field().words();
  std::string error;
  if (e.slots == 0 || e.slot + e.slots > config_.window_size) {
    error = "upload covers samples [" + std::to_string(e.slot) + ", " +
            std::to_string(e.slot + e.slots) + ") outside a window of " +
            std::to_string(config_.window_size);
  } else if (e.complete && e.slot + e.slots != config_.window_size) {
    error = "final upload ends at sample " + std::to_string(e.slot + e.slots) +
            ", window has " + std::to_string(config_.window_size);
  } else if (e.payload.size() != e.slots * per_sample) {
    error = "expected " + std::to_string(e.slots * per_sample) + " payload words for " +
            std::to_string(e.slots) + " samples, got " + std::to_string(e.payload.size());
  } else {
    try {
      config_.codec.field().from_words(e.payload);
    } catch (const Error& ex) {
      error = std::string("bad share: ") + ex.what();
    }
  }
  if (!error.empty()) {
    reply(error_reply(e.session, error));
    return;
  }

  StoredUpload upload{e.session, e.slot, e.slots, e.complete, e.payload};
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mu_);
    auto& slot = sessions_[e.session];
    if (!slot) {
      slot = std::make_shared<Session>();
      slot->id = e.session;
    }
    s = slot;
    const auto it = s->chunks.find(e.slot);
    const bool duplicate = it != s->chunks.end() && it->second.words == upload.words &&
                           it->second.slots == upload.slots;
    if (!duplicate) {
      if (s->status != SessionStatus::kAwaitingData) {
        error = "session is " + std::string(to_string(s->status));
      } else {
        for (const auto& [start, c] : s->chunks) {
          if (e.slot < start + c.slots && start < e.slot + e.slots) {
            error = "upload overlaps samples already received";
          }
        }
      }
      if (error.empty()) {
        try {
          store_.append(upload);
        } catch (const StorageError& ex) {
          error = ex.what();
        }
      }
      if (error.empty()) {
        s->chunks.emplace(e.slot, std::move(upload));
        s->complete = s->complete || e.complete;
      }
    }
  }
  if (!error.empty()) {
    reply(error_reply(e.session, error));
    return;
  }
  Envelope ack;
  ack.session = e.session;
  ack.sender = config_.id;
  ack.type = MsgType::kAck;
  ack.seq = e.seq;
  ack.op = transport::kOpStored;
  reply(ack);
  maybe_start(s);
}

void PartyService::handle_await(const Envelope& e, const Reply& reply) {
  std::optional<Envelope> now;
  {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(e.session);
    if (it == sessions_.end()) {
      now = error_reply(e.session, "unknown session " + transport::to_hex(e.session));
    } else if (it->second->status == SessionStatus::kDone) {
      Envelope r;
      r.session = e.session;
      r.sender = config_.id;
      r.type = MsgType::kLabelResult;
      r.payload = it->second->report->to_payload();
      now = r;
    } else if (it->second->status == SessionStatus::kFailed) {
      now = error_reply(e.session, it->second->reason);
    } else {
      it->second->waiters.push_back(reply);
    }
  }
  if (now) reply(*now);
}

void PartyService::maybe_start(const std::shared_ptr<Session>& s) {
  std::lock_guard lock(mu_);
  if (s->status != SessionStatus::kAwaitingData || !s->complete ||
      s->samples() != config_.window_size) {
    return;
  }
  s->status = SessionStatus::kRunning;
  ++running_;
  reap_locked();
  auto finished = std::make_shared<std::atomic<bool>>(false);
  workers_.push_back(Worker{std::thread([this, s, finished] {
                              run(s);
                              finished->store(true);
                            }),
                            finished});
}

void PartyService::reap_locked() {
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (it->finished->load()) {
      it->thread.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
}

LabelReport evaluate_window(mpc::Engine& engine, std::span<const FieldElement> column,
                            features::FeatureKind kind, std::size_t window_size,
                            const classifiers::ModelParams& model,
                            const classifiers::InferenceOptions& inference) {
  using Clock = std::chrono::steady_clock;
  if (column.size() != 3 * window_size) {
    throw MalformedInput("column holds " + std::to_string(column.size()) + " shares, expected " +
                         std::to_string(3 * window_size));
  }
  const Field& field = engine.field();
  const int f = engine.codec().frac_bits();
  std::vector<features::SharedSample> window;
  window.reserve(window_size);
  for (std::size_t i = 0; i < column.size(); i += 3) {
    window.push_back({engine.input(column[i], f), engine.input(column[i + 1], f),
                      engine.input(column[i + 2], f)});
  }

  auto& counter = engine.counter();
  const std::uint64_t before = counter.rounds();
  const auto t0 = Clock::now();
  counter.set_phase("fe");
  const auto x = features::extract(engine, kind, window, window_size);
  const auto t1 = Clock::now();
  counter.set_phase("in");
  const mpc::Secret bit = classifiers::decision_bit(engine, x, model, inference);
  const auto t2 = Clock::now();
  counter.set_phase("open");
  engine.mark_output(bit);
  const FieldElement label = engine.open(bit);
  const auto t3 = Clock::now();

  if (label != field.zero() && label != field.one()) {
    throw ProtocolError("opened label is not a bit");
  }
  auto us = [](Clock::duration d) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(d).count());
  };
  LabelReport report;
  report.label = label == field.one() ? 1 : 0;
  report.fe_rounds = counter.phase_rounds("fe");
  report.in_rounds = counter.phase_rounds("in");
  report.open_rounds = counter.phase_rounds("open");
  report.fe_us = us(t1 - t0);
  report.in_us = us(t2 - t1);
  report.open_us = us(t3 - t2);
  if (report.total_rounds() != counter.rounds() - before) {
    throw ProtocolError("phase rounds do not add up to the session total");
  }
  return report;
}

LabelReport PartyService::execute(Session& s, std::vector<mpc::OpenRecord>* opens) {
  const transport::NodeId n = static_cast<transport::NodeId>(config_.engine.policy.parties);

  Envelope ready;
  ready.session = s.id;
  ready.sender = config_.id;
  ready.type = MsgType::kAck;
  ready.seq = transport::kSeqReady;
  ready.op = transport::kOpReady;
  ready.note = hash_;
  for (transport::NodeId p = 1; p <= n; ++p) {
    if (p != config_.id) peers_.send(p, ready);
  }
  for (transport::NodeId p = 1; p <= n; ++p) {
    if (p == config_.id) continue;
    const Envelope r = mailbox_.wait({s.id, p, MsgType::kAck, 0, transport::kSeqReady},
                                     config_.ready_timeout);
    if (r.note != hash_) {
      throw ConfigError("configuration mismatch with party " + std::to_string(p));
    }
  }

  std::vector<std::uint64_t> words;
  {
    std::lock_guard lock(mu_);
    for (const auto& [slot, c] : s.chunks) words.insert(words.end(), c.words.begin(), c.words.end());
  }
  const std::vector<FieldElement> column = config_.codec.field().from_words(words);

  std::unique_ptr<RandomSource> rng = rng_ ? rng_(s.id) : std::make_unique<SystemRandom>();
  transport::SessionChannel channel(s.id, config_.id, peers_, mailbox_, config_.session_timeout);
  mpc::Engine engine(config_.codec, config_.engine, config_.id, channel, *rng);
  const LabelReport report = evaluate_window(engine, column, config_.feature_kind,
                                             config_.window_size, config_.model, config_.inference);
  if (opens) *opens = engine.transcript().opens;
  return report;
}

void PartyService::run(std::shared_ptr<Session> s) {
  std::vector<mpc::OpenRecord> opens;
  try {
    const LabelReport report = execute(*s, config_.keep_transcripts ? &opens : nullptr);
    {
      std::lock_guard lock(mu_);
      s->opens = std::move(opens);
    }
    finish(*s, report, "");
  } catch (const std::exception& e) {
    const std::string reason = "party " + std::to_string(config_.id) + ": " + e.what();
    const Envelope err = error_reply(s->id, reason);
    for (transport::NodeId p = 1; p <= config_.engine.policy.parties; ++p) {
      if (p == config_.id) continue;
      try {
        peers_.send(p, err);
      } catch (const std::exception&) {
        // The peer is gone; its own timeout covers it.
      }
    }
    finish(*s, std::nullopt, reason);
  }
  mailbox_.forget(s->id);
}

void PartyService::finish(Session& s, std::optional<LabelReport> report, std::string reason) {
  std::vector<Reply> waiters;
  Envelope out;
  {
    std::lock_guard lock(mu_);
    s.status = report ? SessionStatus::kDone : SessionStatus::kFailed;
    s.report = report;
    s.reason = reason;
    if (report) s.total_rounds = report->total_rounds();
    s.chunks.clear();
    waiters.swap(s.waiters);
  }
  try {
    store_.append(StoredResult{s.id, report ? std::optional<int>(report->label) : std::nullopt,
                               reason});
  } catch (const StorageError& e) {
    std::clog << "falldet: party " << config_.id << ": " << e.what() << "\n";
  }
  if (report) {
    out.session = s.id;
    out.sender = config_.id;
    out.type = MsgType::kLabelResult;
    out.payload = report->to_payload();
    std::lock_guard lock(timing_mu_);
    if (timing_) {
      *timing_ << transport::to_hex(s.id) << ',' << report->fe_rounds << ','
               << report->in_rounds << ',' << std::fixed << std::setprecision(3)
               << report->fe_us / 1000.0 << ',' << report->in_us / 1000.0 << ','
               << report->label << '\n';
      timing_->unsetf(std::ios::floatfield);
      timing_->flush();
    }
  } else {
    out = error_reply(s.id, reason);
  }
  for (const Reply& w : waiters) w(out);
  {
    std::lock_guard lock(mu_);
    --running_;
  }
  idle_cv_.notify_all();
}

std::size_t PartyService::recover() {
  const Recovery r = store_.recover();
  std::lock_guard lock(mu_);
  std::map<SessionId, const StoredResult*> results;
  for (const StoredResult& res : r.results) results[res.session] = &res;
  for (const StoredUpload& u : r.uploads) {
    if (results.count(u.session)) continue;
    auto& s = sessions_[u.session];
    if (!s) {
      s = std::make_shared<Session>();
      s->id = u.session;
    }
    s->chunks.emplace(u.slot, u);
    s->complete = s->complete || u.complete;
  }
  for (const auto& [id, res] : results) {
    auto& s = sessions_[id];
    if (!s) s = std::make_shared<Session>();
    s->id = id;
    s->chunks.clear();
    s->reason = res->reason;
    if (res->label) {
      s->status = SessionStatus::kDone;
      s->report = LabelReport{};
      s->report->label = *res->label;
    } else {
      s->status = SessionStatus::kFailed;
    }
  }
  return r.skipped;
}

std::optional<SessionSummary> PartyService::session(const SessionId& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  const Session& s = *it->second;
  return SessionSummary{s.id, s.status, s.samples(), s.report, s.reason, s.opens, s.total_rounds};
}

std::vector<SessionSummary> PartyService::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<SessionSummary> out;
  for (const auto& [id, s] : sessions_) {
    out.push_back({s->id, s->status, s->samples(), s->report, s->reason, s->opens,
                   s->total_rounds});
  }
  return out;
}

void PartyService::set_timing_sink(std::ostream* out) {
  std::lock_guard lock(timing_mu_);
  timing_ = out;
}

void PartyService::write_timing_header(std::ostream& out) {
  out << "session_id,fe_rounds,in_rounds,fe_ms,in_ms,label\n";
}

void PartyService::drain() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return running_ == 0; });
  reap_locked();
}

PartyServer::PartyServer(PartyService& service, const std::string& host, std::uint16_t port,
                         std::shared_ptr<transport::TlsContext> tls)
    : service_(service),
      server_(
          host, port,
          [this](Envelope e, const std::shared_ptr<transport::Connection>& conn) {
            auto promise = std::make_shared<std::promise<Envelope>>();
            auto once = std::make_shared<std::once_flag>();
            auto reply = promise->get_future();
            const SessionId session = e.session;
            const bool expects = service_.handle(std::move(e), [promise, once](const Envelope& r) {
              std::call_once(*once, [&] { promise->set_value(r); });
            });
            if (!expects) return;
            const auto limit =
                service_.config().ready_timeout + service_.config().session_timeout;
            Envelope out;
            if (reply.wait_for(limit) == std::future_status::ready) {
              out = reply.get();
            } else {
              out.session = session;
              out.sender = service_.config().id;
              out.type = MsgType::kError;
              out.note = "session timed out";
            }
            try {
              conn->send(out);
            } catch (const TransportError&) {
              // The device went away; nothing to tell it.
            }
          },
          std::move(tls)) {}

}  // namespace falldet::party
