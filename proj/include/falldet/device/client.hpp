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


#ifndef FALLDET_DEVICE_CLIENT_HPP_
#define FALLDET_DEVICE_CLIENT_HPP_

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falldet/features.hpp"
#include "falldet/fixed_point.hpp"
#include "falldet/random.hpp"
#include "falldet/shamir.hpp"
#include "falldet/transport/memory_bus.hpp"
#include "falldet/transport/protocol.hpp"
#include "falldet/transport/tcp.hpp"

namespace falldet::device {

// One accelerometer reading; components in g.
struct ImuRecord {
  double timestamp = 0;
  double ax = 0;
  double ay = 0;
  double az = 0;
  std::optional<int> label;
  std::size_t line = 0;
};

// CSV with header `timestamp,ax,ay,az[,label]` (column order free, extra
// columns ignored). Throws IngestError naming the line at fault.
std::vector<ImuRecord> read_csv(std::istream& in, const std::string& source = "<input>");
std::vector<ImuRecord> read_csv_file(const std::string& path);
void write_csv(std::ostream& out, std::span<const ImuRecord> records);

struct LabeledWindow {
  features::Window window;
  // 1 iff any member record is labeled 1; empty for unlabeled input.
  std::optional<int> label;
  std::size_t first_record = 0;
};

// Fixed-length windows every `stride` records; a trailing partial window is
// dropped. Throws ConfigError when window_len < 3 or stride == 0.
std::vector<LabeledWindow> make_windows(std::span<const ImuRecord> records,
                                        std::size_t window_len, std::size_t stride,
                                        double rate_hz = features::kDefaultRateHz);

// Shares of one window: for every sample and component (x, y, z), one
// share per party. Column j is everything party j receives.
class ShareMatrix {
 public:
  ShareMatrix(std::size_t parties, std::size_t samples);

  std::size_t parties() const { return parties_; }
  std::size_t samples() const { return samples_; }

  // Party indices start at 1; component is 0, 1, 2 for x, y, z.
  FieldElement& at(std::size_t sample, int component, shamir::PartyIndex party);
  const FieldElement& at(std::size_t sample, int component, shamir::PartyIndex party) const;

  // Party j's shares, sample-major: x0 y0 z0 x1 ...
  std::vector<FieldElement> column(shamir::PartyIndex party) const;
  std::vector<shamir::Share> row(std::size_t sample, int component) const;

 private:
  std::size_t parties_;
  std::size_t samples_;
  std::vector<FieldElement> values_;
};

// Fresh sharing of every component of every sample. With `debug_check`
// each row is reconstructed and compared with the encoding.
ShareMatrix share_window(const features::Window& w, const FixedPointCodec& codec,
                         const shamir::SharingPolicy& policy, RandomSource& rng,
                         bool debug_check = false);

// Request/reply link from the device to one party.
class PartyLink {
 public:
  virtual ~PartyLink() = default;
  virtual transport::NodeId party() const = 0;
  // Sends `request` and returns the party's reply. Throws RemoteError for an
  // error reply, TimeoutError or TransportError otherwise.
  virtual transport::Envelope request(const transport::Envelope& request,
                                      std::chrono::milliseconds timeout) = 0;
};

// The device's attachment to an in-memory bus as node 0.
class BusPort {
 public:
  explicit BusPort(transport::MemoryBus& bus);
  ~BusPort();
  BusPort(const BusPort&) = delete;
  BusPort& operator=(const BusPort&) = delete;

  std::unique_ptr<PartyLink> link(transport::NodeId party);

 private:
  class Link;
  transport::MemoryBus& bus_;
  transport::Mailbox mailbox_;
};

// One connection per party, re-established once on failure.
class TcpLink final : public PartyLink {
 public:
  TcpLink(transport::PeerInfo peer, std::shared_ptr<transport::TlsContext> tls,
          transport::RetryPolicy retry = {});
  transport::NodeId party() const override { return peer_.id; }
  transport::Envelope request(const transport::Envelope& request,
                              std::chrono::milliseconds timeout) override;

 private:
  transport::PeerInfo peer_;
  std::shared_ptr<transport::TlsContext> tls_;
  transport::RetryPolicy retry_;
  std::mutex mu_;
  std::shared_ptr<transport::Connection> conn_;
};

std::vector<std::unique_ptr<PartyLink>> tcp_links(const transport::PeerConfig& peers,
                                                  std::shared_ptr<transport::TlsContext> tls,
                                                  transport::RetryPolicy retry = {});

struct DeviceOptions {
  shamir::SharingPolicy policy;
  std::chrono::milliseconds timeout{120000};
  bool debug_check = false;
};

struct WindowResult {
  transport::SessionId session{};
  int label = 0;
  // Reports from every party, in link order.
  std::vector<transport::LabelReport> reports;
  double share_ms = 0;   // sharing calls only
  double upload_ms = 0;  // first byte sent to last ack
  double total_ms = 0;   // sharing to label
};

class DeviceClient {
 public:
  // One link per party, ordered by party index.
  DeviceClient(FixedPointCodec codec, std::vector<std::unique_ptr<PartyLink>> links,
               RandomSource& rng, DeviceOptions options = {});

  // Sends column j to party j only, in parallel; returns the upload time in
  // milliseconds. Throws on any failed or missing ack.
  double distribute(const ShareMatrix& m, const transport::SessionId& session);
  // Waits for every party's label; throws ProtocolError if they disagree.
  std::vector<transport::LabelReport> await_label(const transport::SessionId& session);
  WindowResult classify(const features::Window& w);

 private:
  FixedPointCodec codec_;
  std::vector<std::unique_ptr<PartyLink>> links_;
  RandomSource& rng_;
  DeviceOptions options_;
};

// Device timing CSV: session_id,share_ms,upload_ms,total_ms,label
void write_timing_header(std::ostream& out);
void write_timing_row(std::ostream& out, const WindowResult& r);

}  // namespace falldet::device

#endif  // FALLDET_DEVICE_CLIENT_HPP_
