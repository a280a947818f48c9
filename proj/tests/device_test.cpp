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


#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "falldet/device/client.hpp"
#include "falldet/error.hpp"
#include "test_util.hpp"

namespace falldet::device {
namespace {

using transport::Envelope;
using transport::MsgType;

std::vector<ImuRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "t.csv");
}

std::string ingest_error(const std::string& text) {
  try {
    parse(text);
  } catch (const IngestError& e) {
    return e.what();
  }
  return "";
}

TEST(ReadCsvTest, WellFormedRows) {
  const auto r = parse("timestamp,ax,ay,az\n0,0.1,0.2,1.0\n0.032,0.1,0.2,0.98\n0.064,-0.5,1e-2,1\n");
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[2].ax, -0.5);
  EXPECT_DOUBLE_EQ(r[2].ay, 0.01);
  EXPECT_EQ(r[2].line, 4u);
  EXPECT_FALSE(r[0].label);
}

TEST(ReadCsvTest, LabelColumnAndFreeOrder) {
  const auto r = parse("label,az,ay,ax,timestamp,extra\r\n1,1.0,0,0.5,0,x\r\n0,1.0,0,0.25,1,y\r\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].label, 1);
  EXPECT_EQ(r[1].label, 0);
  EXPECT_DOUBLE_EQ(r[1].ax, 0.25);
}

TEST(ReadCsvTest, ErrorsNameTheLine) {
  EXPECT_NE(ingest_error("timestamp,ax,ay,az\n0,1,1,1\n1,NaN,0,0\n").find("t.csv:3: ax is not finite"),
            std::string::npos);
  EXPECT_NE(ingest_error("timestamp,ax,ay\n").find("missing column 'az'"), std::string::npos);
  EXPECT_NE(ingest_error("timestamp,ax,ay,az\n0,1,x,1\n").find(":2: ay is not a number"),
            std::string::npos);
  EXPECT_NE(ingest_error("timestamp,ax,ay,az\n0,1,1\n").find(":2: expected 4 fields"),
            std::string::npos);
  EXPECT_NE(ingest_error("timestamp,ax,ay,az\n1,1,1,1\n0,1,1,1\n").find(":3: timestamp"),
            std::string::npos);
  EXPECT_NE(ingest_error("timestamp,ax,ay,az,label\n0,1,1,1,2\n").find(":2: label"),
            std::string::npos);
  EXPECT_NE(ingest_error("").find("missing header"), std::string::npos);
  EXPECT_THROW(read_csv_file("/nonexistent/file.csv"), IngestError);
}

TEST(ReadCsvTest, WriteThenReadIsIdentity) {
  std::vector<ImuRecord> rows;
  for (int i = 0; i < 30; ++i) rows.push_back({i * 0.032, 0.1 * i, -0.3, 1.0 / 3, i % 7 == 0, 0});
  std::stringstream s;
  write_csv(s, rows);
  const auto back = read_csv(s);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].ax, rows[i].ax);
    EXPECT_EQ(back[i].az, rows[i].az);
    EXPECT_EQ(back[i].label, rows[i].label);
  }
}

std::vector<ImuRecord> records(std::size_t n, std::size_t fall_at = SIZE_MAX) {
  std::vector<ImuRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({static_cast<double>(i), 0, 0, 1, i == fall_at ? 1 : 0, i + 2});
  }
  return out;
}

TEST(MakeWindowsTest, CountsAndLabels) {
  EXPECT_EQ(make_windows(records(48), 24, 24).size(), 2u);
  EXPECT_EQ(make_windows(records(47), 24, 24).size(), 1u);
  EXPECT_EQ(make_windows(records(48), 24, 12).size(), 3u);
  const auto w = make_windows(records(48, 30), 24, 24);
  EXPECT_EQ(w[0].label, 0);
  EXPECT_EQ(w[1].label, 1);
  EXPECT_EQ(w[1].first_record, 24u);
  EXPECT_EQ(w[1].window.samples.size(), 24u);
  auto unlabeled = records(24);
  for (auto& r : unlabeled) r.label.reset();
  EXPECT_FALSE(make_windows(unlabeled, 24, 24)[0].label);
  EXPECT_THROW(make_windows(records(10), 2, 1), ConfigError);
  EXPECT_THROW(make_windows(records(10), 3, 0), ConfigError);
}

features::Window sample_window(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-8, 8);
  features::Window w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back({u(gen), u(gen), u(gen)});
  return w;
}

TEST(ShareWindowTest, AnyTwoColumnsReconstructEveryRow) {
  const auto codec = falldet::testing::default_codec();
  const shamir::SharingPolicy policy;
  SeededRandom rng(1);
  const auto w = sample_window(24, 2);
  const ShareMatrix m = share_window(w, codec, policy, rng, true);
  for (std::size_t s = 0; s < 24; ++s) {
    const double comp[3] = {w.samples[s].x, w.samples[s].y, w.samples[s].z};
    for (int c = 0; c < 3; ++c) {
      const auto row = m.row(s, c);
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
          const shamir::Share pair[2] = {row[i], row[j]};
          ASSERT_EQ(shamir::reconstruct(codec.field(), pair, policy), codec.encode(comp[c]));
        }
      }
      // One column alone is below the threshold.
      EXPECT_THROW(shamir::reconstruct(codec.field(), std::span(row).first(1), policy),
                   InsufficientShares);
    }
  }
  EXPECT_EQ(m.column(2).size(), 72u);
  EXPECT_EQ(m.column(2)[4], m.at(1, 1, 2));
}

TEST(ShareWindowTest, FreshRandomnessPerSharing) {
  const auto codec = falldet::testing::default_codec();
  SeededRandom rng(3);
  const auto w = sample_window(24, 4);
  const auto a = share_window(w, codec, {}, rng);
  const auto b = share_window(w, codec, {}, rng);
  std::size_t same = 0;
  for (shamir::PartyIndex p = 1; p <= 3; ++p) {
    const auto ca = a.column(p), cb = b.column(p);
    for (std::size_t i = 0; i < ca.size(); ++i) same += ca[i] == cb[i];
  }
  EXPECT_EQ(same, 0u);
}

TEST(ShareWindowTest, OutOfRangeComponentIsRangeError) {
  const auto codec = falldet::testing::default_codec();
  SeededRandom rng(5);
  features::Window w;
  w.samples = {{0, 0, 1}, {0, 0, 2e6}, {0, 0, 1}};
  EXPECT_THROW(share_window(w, codec, {}, rng), RangeError);
}

TEST(ShareWindowTest, SinglePartyColumnIsUniformInSmallField) {
  // Integers in F_97: a party's share of a fixed window, over every choice
  // of the sharing coefficient, takes each field value exactly once.
  const FixedPointCodec codec(Field(97), 0, 5);
  for (double secret : {0.0, 1.0, 5.0, -7.0, 13.0}) {
    features::Window w;
    w.samples = {{secret, 0, 0}};
    for (shamir::PartyIndex p = 1; p <= 3; ++p) {
      std::vector<int> seen(97, 0);
      for (std::uint64_t a = 0; a < 97; ++a) {
        falldet::testing::ScriptedRandom rng({a, 0, 0});
        const auto m = share_window(w, codec, {}, rng);
        ++seen[static_cast<std::size_t>(m.at(0, 0, p).value())];
      }
      EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }))
          << "secret " << secret << " party " << p;
    }
  }
}

// Fake parties on a bus: record uploads, ack them, and answer await_label
// with a fixed label.
struct FakeParties {
  explicit FakeParties(transport::MemoryBus& bus, int label = 1) : bus(bus) {
    for (transport::NodeId p = 1; p <= 3; ++p) {
      bus.attach(p, [this, p, label](Envelope e) {
        Envelope r;
        r.session = e.session;
        r.sender = p;
        if (e.type == MsgType::kShareUpload) {
          {
            std::lock_guard lock(mu);
            received[p].push_back(e);
          }
          r.type = MsgType::kAck;
          r.op = transport::kOpStored;
          r.seq = e.seq;
        } else {
          transport::LabelReport rep;
          rep.label = p == 3 && disagree ? 1 - label : label;
          rep.fe_rounds = 5;
          r.type = MsgType::kLabelResult;
          r.payload = rep.to_payload();
        }
        this->bus.send(p, 0, r);
      });
    }
  }
  transport::MemoryBus& bus;
  std::mutex mu;
  std::map<transport::NodeId, std::vector<Envelope>> received;
  bool disagree = false;
};

std::vector<std::unique_ptr<PartyLink>> bus_links(BusPort& port) {
  std::vector<std::unique_ptr<PartyLink>> links;
  for (transport::NodeId p = 1; p <= 3; ++p) links.push_back(port.link(p));
  return links;
}

TEST(DistributeTest, ColumnsPartitionTheMatrix) {
  transport::MemoryBus bus;
  FakeParties parties(bus);
  BusPort port(bus);
  SeededRandom rng(6);
  const auto codec = falldet::testing::default_codec();
  DeviceClient client(codec, bus_links(port), rng);
  const auto m = share_window(sample_window(24, 7), codec, {}, rng);
  const transport::SessionId session{9};
  const double ms = client.distribute(m, session);
  EXPECT_GT(ms, 0);

  std::multiset<std::uint64_t> sent, expected;
  for (transport::NodeId p = 1; p <= 3; ++p) {
    ASSERT_EQ(parties.received[p].size(), 1u);
    const Envelope& e = parties.received[p][0];
    EXPECT_TRUE(e.complete);
    EXPECT_EQ(e.slots, 24u);
    EXPECT_EQ(codec.field().from_words(e.payload), m.column(p));
    sent.insert(e.payload.begin(), e.payload.end());
    const auto words = codec.field().to_words(m.column(p));
    expected.insert(words.begin(), words.end());
  }
  EXPECT_EQ(sent, expected);
}

TEST(DistributeTest, ClassifyReturnsAgreedLabelWithTimings) {
  transport::MemoryBus bus;
  FakeParties parties(bus, 1);
  BusPort port(bus);
  SeededRandom rng(8);
  DeviceClient client(falldet::testing::default_codec(), bus_links(port), rng);
  const auto r = client.classify(sample_window(24, 9));
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.reports[0].fe_rounds, 5u);
  EXPECT_GT(r.share_ms, 0);
  EXPECT_GT(r.upload_ms, 0);
  EXPECT_GE(r.total_ms, r.share_ms + r.upload_ms);

  std::stringstream csv;
  write_timing_header(csv);
  write_timing_row(csv, r);
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "session_id,share_ms,upload_ms,total_ms,label");
  EXPECT_EQ(row.substr(0, 33), transport::to_hex(r.session) + ",");
  EXPECT_EQ(row.back(), '1');

  parties.disagree = true;
  EXPECT_THROW(client.classify(sample_window(24, 10)), ProtocolError);
}

TEST(DistributeTest, ErrorReplyAbortsTheSession) {
  transport::MemoryBus bus;
  bus.attach(1, [&](Envelope e) {
    Envelope err;
    err.session = e.session;
    err.sender = 1;
    err.type = MsgType::kError;
    err.note = "disk full";
    bus.send(1, 0, err);
  });
  for (transport::NodeId p = 2; p <= 3; ++p) bus.attach(p, [](Envelope) {});
  BusPort port(bus);
  SeededRandom rng(11);
  DeviceOptions options;
  options.timeout = std::chrono::milliseconds(2000);
  DeviceClient client(falldet::testing::default_codec(), bus_links(port), rng, options);
  try {
    client.classify(sample_window(24, 12));
    ADD_FAILURE() << "expected RemoteError";
  } catch (const RemoteError& e) {
    EXPECT_NE(std::string(e.what()).find("disk full"), std::string::npos);
  }
}

TEST(TcpLinkTest, UnreachablePartyIsTransportError) {
  std::uint16_t port;
  {
    transport::TcpServer probe("127.0.0.1", 0, [](Envelope, const auto&) {});
    port = probe.port();
  }
  transport::RetryPolicy retry;
  retry.attempts = 2;
  retry.backoff = std::chrono::milliseconds(5);
  TcpLink link({1, "127.0.0.1", port, ""}, nullptr, retry);
  EXPECT_THROW(link.request(Envelope{}, std::chrono::milliseconds(100)), TransportError);
}

TEST(TcpLinkTest, SilentPartyTimesOut) {
  transport::TcpServer server("127.0.0.1", 0, [](Envelope, const auto&) {});
  TcpLink link({1, "127.0.0.1", server.port(), ""}, nullptr);
  EXPECT_THROW(link.request(Envelope{}, std::chrono::milliseconds(50)), TimeoutError);
}

}  // namespace
}  // namespace falldet::device
