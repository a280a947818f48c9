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


#include "falldet/device/client.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <thread>

#include "falldet/error.hpp"

namespace falldet::device {

using transport::Envelope;
using transport::MsgType;
using transport::NodeId;
using transport::SessionId;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

}  // namespace

std::vector<ImuRecord> read_csv(std::istream& in, const std::string& source) {
  auto fail = [&](std::size_t line, const std::string& what) -> IngestError {
    return IngestError(source + ":" + std::to_string(line) + ": " + what);
  };
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) throw fail(1, "missing header");
  ++line_no;
  const auto header = split(text);
  std::map<std::string_view, std::size_t> col;
  std::vector<std::string> names(header.begin(), header.end());
  for (std::size_t i = 0; i < names.size(); ++i) col.emplace(names[i], i);
  for (const char* required : {"timestamp", "ax", "ay", "az"}) {
    if (!col.count(required)) throw fail(1, std::string("missing column '") + required + "'");
  }
  const std::size_t idx[4] = {col["timestamp"], col["ax"], col["ay"], col["az"]};
  const char* field_names[4] = {"timestamp", "ax", "ay", "az"};
  const bool labeled = col.count("label") > 0;
  const std::size_t label_idx = labeled ? col["label"] : 0;

  std::vector<ImuRecord> out;
  while (std::getline(in, text)) {
    ++line_no;
    if (trim(text).empty()) continue;
    const auto fields = split(text);
    if (fields.size() != names.size()) {
      throw fail(line_no, "expected " + std::to_string(names.size()) + " fields, got " +
                              std::to_string(fields.size()));
    }
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const std::string_view f = fields[idx[k]];
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v[k]);
      if (f.empty() || ec != std::errc() || end != f.data() + f.size()) {
        throw fail(line_no, std::string(field_names[k]) + " is not a number: '" +
                                std::string(f) + "'");
      }
      if (!std::isfinite(v[k])) {
        throw fail(line_no, std::string(field_names[k]) + " is not finite");
      }
    }
    ImuRecord r{v[0], v[1], v[2], v[3], std::nullopt, line_no};
    if (labeled) {
      const std::string_view f = fields[label_idx];
      if (f == "0") {
        r.label = 0;
      } else if (f == "1") {
        r.label = 1;
      } else {
        throw fail(line_no, "label must be 0 or 1, got '" + std::string(f) + "'");
      }
    }
    if (!out.empty() && r.timestamp < out.back().timestamp) {
      throw fail(line_no, "timestamp goes backwards");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<ImuRecord> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path + ": cannot open");
  return read_csv(in, path);
}

void write_csv(std::ostream& out, std::span<const ImuRecord> records) {
  const bool labeled = !records.empty() && records.front().label.has_value();
  out << "timestamp,ax,ay,az" << (labeled ? ",label" : "") << "\n";
  out << std::setprecision(17);
  for (const ImuRecord& r : records) {
    out << r.timestamp << ',' << r.ax << ',' << r.ay << ',' << r.az;
    if (labeled) out << ',' << r.label.value_or(0);
    out << '\n';
  }
}

std::vector<LabeledWindow> make_windows(std::span<const ImuRecord> records,
                                        std::size_t window_len, std::size_t stride,
                                        double rate_hz) {
  if (window_len < 3) throw ConfigError("window length must be at least 3");
  if (stride == 0) throw ConfigError("stride must be positive");
  std::vector<LabeledWindow> out;
  for (std::size_t start = 0; start + window_len <= records.size(); start += stride) {
    LabeledWindow w;
    w.first_record = start;
    w.window.rate_hz = rate_hz;
    w.window.samples.reserve(window_len);
    for (std::size_t i = start; i < start + window_len; ++i) {
      const ImuRecord& r = records[i];
      w.window.samples.push_back({r.ax, r.ay, r.az});
      if (r.label) w.label = std::max(w.label.value_or(0), *r.label);
    }
    out.push_back(std::move(w));
  }
  return out;
}

ShareMatrix::ShareMatrix(std::size_t parties, std::size_t samples)
    : parties_(parties), samples_(samples), values_(parties * samples * 3) {}

FieldElement& ShareMatrix::at(std::size_t sample, int component, shamir::PartyIndex party) {
  return values_[(sample * 3 + static_cast<std::size_t>(component)) * parties_ + party - 1];
}

const FieldElement& ShareMatrix::at(std::size_t sample, int component,
                                    shamir::PartyIndex party) const {
  return values_[(sample * 3 + static_cast<std::size_t>(component)) * parties_ + party - 1];
}

std::vector<FieldElement> ShareMatrix::column(shamir::PartyIndex party) const {
  std::vector<FieldElement> out;
  out.reserve(samples_ * 3);
  for (std::size_t s = 0; s < samples_; ++s) {
    for (int c = 0; c < 3; ++c) out.push_back(at(s, c, party));
  }
  return out;
}

std::vector<shamir::Share> ShareMatrix::row(std::size_t sample, int component) const {
  std::vector<shamir::Share> out;
  for (shamir::PartyIndex p = 1; p <= parties_; ++p) out.push_back({p, at(sample, component, p)});
  return out;
}

ShareMatrix share_window(const features::Window& w, const FixedPointCodec& codec,
                         const shamir::SharingPolicy& policy, RandomSource& rng,
                         bool debug_check) {
  policy.validate();
  ShareMatrix m(policy.parties, w.samples.size());
  std::vector<FieldElement> shares(policy.parties);
  for (std::size_t s = 0; s < w.samples.size(); ++s) {
    const double comp[3] = {w.samples[s].x, w.samples[s].y, w.samples[s].z};
    for (int c = 0; c < 3; ++c) {
      const FieldElement secret = codec.encode(comp[c]);
      shamir::share_values(codec.field(), secret, policy, rng, shares);
      for (shamir::PartyIndex p = 1; p <= policy.parties; ++p) m.at(s, c, p) = shares[p - 1];
      if (debug_check) {
        const auto row = m.row(s, c);
        if (shamir::reconstruct(codec.field(), row, policy) != secret ||
            !shamir::consistent(codec.field(), row, policy)) {
          throw ProtocolError("share_window: reconstruction check failed");
        }
      }
    }
  }
  return m;
}

namespace {

// The reply a party owes for `request`.
transport::MessageKey reply_key(const Envelope& request, NodeId party) {
  if (request.type == MsgType::kShareUpload) {
    return {request.session, party, MsgType::kAck, 0, request.seq};
  }
  return {request.session, party, MsgType::kLabelResult, 0, 0};
}

}  // namespace

class BusPort::Link final : public PartyLink {
 public:
  Link(BusPort& port, NodeId party) : port_(port), party_(party) {}
  NodeId party() const override { return party_; }

  Envelope request(const Envelope& request, std::chrono::milliseconds timeout) override {
    port_.bus_.send(transport::kDeviceId, party_, request);
    Envelope reply = port_.mailbox_.wait(reply_key(request, party_), timeout);
    return reply;
  }

 private:
  BusPort& port_;
  NodeId party_;
};

BusPort::BusPort(transport::MemoryBus& bus) : bus_(bus) {
  bus_.attach(transport::kDeviceId, [this](Envelope e) { mailbox_.deliver(std::move(e)); });
}

BusPort::~BusPort() { bus_.detach(transport::kDeviceId); }

std::unique_ptr<PartyLink> BusPort::link(NodeId party) {
  return std::make_unique<Link>(*this, party);
}

TcpLink::TcpLink(transport::PeerInfo peer, std::shared_ptr<transport::TlsContext> tls,
                 transport::RetryPolicy retry)
    : peer_(std::move(peer)), tls_(std::move(tls)), retry_(retry) {}

Envelope TcpLink::request(const Envelope& request, std::chrono::milliseconds timeout) {
  std::lock_guard lock(mu_);
  std::string last_error;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry_.backoff * attempt);
    try {
      if (!conn_ || conn_->closed()) {
        conn_ = transport::Connection::connect(peer_.host, peer_.port, tls_,
                                               retry_.connect_timeout);
      }
      conn_->set_receive_timeout(timeout);
      conn_->send(request);
      std::optional<Envelope> reply = conn_->receive();
      if (!reply) {
        conn_.reset();
        last_error = "connection closed before reply";
        continue;
      }
      if (reply->type == MsgType::kError) {
        throw RemoteError("party " + std::to_string(peer_.id) + ": " + reply->note);
      }
      return *std::move(reply);
    } catch (const TimeoutError&) {
      conn_.reset();
      throw;
    } catch (const TransportError& e) {
      conn_.reset();
      last_error = e.what();
    }
  }
  throw TransportError("party " + std::to_string(peer_.id) + " unreachable after " +
                       std::to_string(retry_.attempts) + " attempts: " + last_error);
}

std::vector<std::unique_ptr<PartyLink>> tcp_links(const transport::PeerConfig& peers,
                                                  std::shared_ptr<transport::TlsContext> tls,
                                                  transport::RetryPolicy retry) {
  std::vector<std::unique_ptr<PartyLink>> out;
  for (const auto& peer : peers.parties) out.push_back(std::make_unique<TcpLink>(peer, tls, retry));
  return out;
}

DeviceClient::DeviceClient(FixedPointCodec codec, std::vector<std::unique_ptr<PartyLink>> links,
                           RandomSource& rng, DeviceOptions options)
    : codec_(std::move(codec)), links_(std::move(links)), rng_(rng), options_(options) {
  options_.policy.validate();
  if (links_.size() != options_.policy.parties) {
    throw ConfigError("expected " + std::to_string(options_.policy.parties) +
                      " party links, got " + std::to_string(links_.size()));
  }
}

double DeviceClient::distribute(const ShareMatrix& m, const SessionId& session) {
  std::vector<Envelope> uploads;
  for (const auto& link : links_) {
    Envelope e;
    e.session = session;
    e.type = MsgType::kShareUpload;
    e.slots = m.samples();
    e.complete = true;
    e.payload = codec_.field().to_words(m.column(link->party()));
    uploads.push_back(std::move(e));
  }
  const auto start = Clock::now();
  std::vector<std::future<Envelope>> acks;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    acks.push_back(std::async(std::launch::async, [&, i] {
      return links_[i]->request(uploads[i], options_.timeout);
    }));
  }
  for (auto& f : acks) {
    const Envelope ack = f.get();
    if (ack.type != MsgType::kAck || ack.op != transport::kOpStored) {
      throw ProtocolError("unexpected reply to share_upload from party " +
                          std::to_string(ack.sender));
    }
  }
  return ms_since(start);
}

std::vector<transport::LabelReport> DeviceClient::await_label(const SessionId& session) {
  Envelope req;
  req.session = session;
  req.type = MsgType::kAck;
  req.op = transport::kOpAwaitLabel;
  req.seq = transport::kSeqAwaitLabel;
  std::vector<std::future<Envelope>> replies;
  for (const auto& link : links_) {
    replies.push_back(std::async(std::launch::async, [&, l = link.get()] {
      return l->request(req, options_.timeout);
    }));
  }
  std::vector<transport::LabelReport> out;
  for (auto& f : replies) {
    const Envelope reply = f.get();
    if (reply.type != MsgType::kLabelResult) {
      throw ProtocolError("unexpected reply to await_label from party " +
                          std::to_string(reply.sender));
    }
    out.push_back(transport::LabelReport::from_payload(reply.payload));
  }
  for (const auto& r : out) {
    if (r.label != out.front().label) throw ProtocolError("parties disagree on the label");
  }
  return out;
}

WindowResult DeviceClient::classify(const features::Window& w) {
  WindowResult r;
  r.session = transport::random_session_id(rng_);
  const auto start = Clock::now();
  const ShareMatrix m = share_window(w, codec_, options_.policy, rng_, options_.debug_check);
  r.share_ms = ms_since(start);
  r.upload_ms = distribute(m, r.session);
  r.reports = await_label(r.session);
  r.label = r.reports.front().label;
  r.total_ms = ms_since(start);
  return r;
}

void write_timing_header(std::ostream& out) {
  out << "session_id,share_ms,upload_ms,total_ms,label\n";
}

void write_timing_row(std::ostream& out, const WindowResult& r) {
  out << transport::to_hex(r.session) << ',' << std::fixed << std::setprecision(3) << r.share_ms
      << ',' << r.upload_ms << ',' << r.total_ms << ',' << r.label << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace falldet::device
