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

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "cli_common.hpp"
#include "falldet/device/client.hpp"
#include "falldet/error.hpp"
#include "falldet/harness/cluster.hpp"
#include "falldet/harness/corpus.hpp"
#include "falldet/party/service.hpp"
#include "falldet/party/store.hpp"
#include "falldet/transport/memory_bus.hpp"

namespace falldet::party {
namespace {

namespace fs = std::filesystem;
using transport::Envelope;
using transport::MsgType;
using transport::SessionId;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("falldet_party_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

SessionId sid(std::uint8_t b) {
  SessionId s{};
  s[0] = b;
  return s;
}

StoredUpload upload(std::uint8_t session, std::uint64_t first_word) {
  return {sid(session), 0, 3, true, {first_word, 2, 3, 4, 5, 6}};
}

TEST(LogStoreTest, RecoversAfterRestart) {
  TempDir dir;
  const std::string path = dir.file("p1.ndjson");
  {
    LogStore store(path);
    store.append(upload(1, 10));
    store.append(upload(2, 20));
    store.append(StoredResult{sid(1), 1, ""});
    store.append(upload(3, 30));
    store.append(StoredResult{sid(2), std::nullopt, "peer 3 timed out"});
  }
  LogStore reopened(path);
  const Recovery r = reopened.recover();
  EXPECT_EQ(r.skipped, 0u);
  ASSERT_EQ(r.uploads.size(), 3u);
  EXPECT_EQ(r.uploads[0], upload(1, 10));
  EXPECT_EQ(r.uploads[1], upload(2, 20));
  EXPECT_EQ(r.uploads[2], upload(3, 30));
  ASSERT_EQ(r.results.size(), 2u);
  EXPECT_EQ(r.results[0].label, 1);
  EXPECT_EQ(r.results[1].reason, "peer 3 timed out");
  EXPECT_FALSE(r.results[1].label);

  // Appending after a restart extends the same log.
  reopened.append(upload(4, 40));
  EXPECT_EQ(LogStore(path).recover().uploads.size(), 4u);
}

TEST(LogStoreTest, TornAndCorruptedRecordsAreSkipped) {
  TempDir dir;
  const std::string path = dir.file("p2.ndjson");
  {
    LogStore store(path);
    store.append(upload(1, 10));
    store.append(upload(2, 20));
    store.append(upload(3, 30));
  }
  std::string text;
  {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  // Flip one payload character of the second record and tear the last.
  const std::size_t second = text.find('\n') + 1;
  const std::size_t at = text.find("\"payload\":\"", second) + 12;
  text[at] = text[at] == 'A' ? 'B' : 'A';
  text.resize(text.size() - 15);
  std::ofstream(path, std::ios::trunc) << text;

  const Recovery r = LogStore(path).recover();
  EXPECT_EQ(r.skipped, 2u);
  ASSERT_EQ(r.uploads.size(), 1u);
  EXPECT_EQ(r.uploads[0], upload(1, 10));
}

TEST(LogStoreTest, UnwritablePathIsStorageError) {
  EXPECT_THROW(LogStore("/nonexistent-dir/x/p.ndjson"), StorageError);
}

TEST(MemoryStoreTest, KeepsAppendOrder) {
  MemoryStore store;
  store.append(upload(2, 1));
  store.append(upload(1, 2));
  const auto r = store.recover();
  ASSERT_EQ(r.uploads.size(), 2u);
  EXPECT_EQ(r.uploads[0].session, sid(2));
}

PartyConfig derivative_svm() {
  return cli::party_config("derivative", "svm", cli::default_model_path("derivative", "svm"),
                           features::kDefaultWindowSize, "public");
}

// A service whose peers never answer; enough for upload handling.
struct NullTransport final : transport::Transport {
  void send(transport::NodeId, const Envelope&) override {}
};

struct Replies {
  std::vector<Envelope> got;
  PartyService::Reply fn() {
    return [this](const Envelope& e) { got.push_back(e); };
  }
};

Envelope upload_envelope(const SessionId& s, const std::vector<std::uint64_t>& words) {
  Envelope e;
  e.session = s;
  e.type = MsgType::kShareUpload;
  e.sender = 0;
  e.slot = 0;
  e.slots = 3;
  e.complete = true;
  e.payload = words;
  return e;
}

std::vector<std::uint64_t> column_words(std::size_t samples, std::uint64_t seed) {
  const FixedPointCodec codec{Field::mersenne127()};
  SeededRandom rng(seed);
  std::vector<FieldElement> col;
  for (std::size_t i = 0; i < samples * 3; ++i) col.push_back(rng.uniform(codec.field()));
  return codec.field().to_words(col);
}

class ServiceUploadTest : public ::testing::Test {
 protected:
  ServiceUploadTest() {
    config = derivative_svm();
    config.ready_timeout = std::chrono::milliseconds(100);
  }
  PartyConfig config;
  NullTransport peers;
  MemoryStore store;
};

TEST_F(ServiceUploadTest, FirstUploadAwaitsDataUntilTheSessionStarts) {
  config.window_size = 3;
  config.engine.policy.parties = 3;
  PartyService svc(config, peers, store);
  Replies r;
  Envelope e = upload_envelope(sid(1), column_words(3, 1));
  e.complete = false;
  e.slots = 3;
  ASSERT_TRUE(svc.handle(e, r.fn()));
  ASSERT_EQ(r.got.size(), 1u);
  EXPECT_EQ(r.got[0].type, MsgType::kAck);
  EXPECT_EQ(r.got[0].op, transport::kOpStored);
  const auto s = svc.session(sid(1));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, SessionStatus::kAwaitingData);
  EXPECT_EQ(s->samples, 3u);
}

TEST_F(ServiceUploadTest, DuplicateUploadIsStoredOnce) {
  config.window_size = 3;
  PartyService svc(config, peers, store);
  Replies r;
  Envelope e = upload_envelope(sid(2), column_words(3, 2));
  e.complete = false;
  svc.handle(e, r.fn());
  svc.handle(e, r.fn());
  ASSERT_EQ(r.got.size(), 2u);
  EXPECT_EQ(r.got[1].type, MsgType::kAck);
  EXPECT_EQ(store.recover().uploads.size(), 1u);

  // Same slot, different content.
  e.payload[0] ^= 1;
  svc.handle(e, r.fn());
  ASSERT_EQ(r.got.size(), 3u);
  EXPECT_EQ(r.got[2].type, MsgType::kError);
  EXPECT_EQ(store.recover().uploads.size(), 1u);
}

TEST_F(ServiceUploadTest, WrongWordCountIsRejected) {
  PartyService svc(config, peers, store);
  Replies r;
  auto words = column_words(24, 3);
  words.pop_back();
  Envelope e = upload_envelope(sid(3), words);
  e.slots = 24;
  svc.handle(e, r.fn());
  ASSERT_EQ(r.got.size(), 1u);
  EXPECT_EQ(r.got[0].type, MsgType::kError);
  EXPECT_NE(r.got[0].note.find("payload words"), std::string::npos) << r.got[0].note;
  EXPECT_FALSE(svc.session(sid(3)) && svc.session(sid(3))->samples > 0);
  EXPECT_TRUE(store.recover().uploads.empty());
}

TEST_F(ServiceUploadTest, NonCanonicalWordsAreRejected) {
  PartyService svc(config, peers, store);
  Replies r;
  auto words = column_words(24, 4);
  words[1] = ~std::uint64_t{0};  // high word above 2^127 - 1
  words[0] = ~std::uint64_t{0};
  Envelope e = upload_envelope(sid(4), words);
  e.slots = 24;
  svc.handle(e, r.fn());
  ASSERT_EQ(r.got.size(), 1u);
  EXPECT_EQ(r.got[0].type, MsgType::kError);
}

TEST_F(ServiceUploadTest, AwaitOnUnknownSessionIsAnError) {
  PartyService svc(config, peers, store);
  Replies r;
  Envelope e;
  e.session = sid(5);
  e.type = MsgType::kAck;
  e.op = transport::kOpAwaitLabel;
  e.seq = transport::kSeqAwaitLabel;
  EXPECT_TRUE(svc.handle(e, r.fn()));
  ASSERT_EQ(r.got.size(), 1u);
  EXPECT_EQ(r.got[0].type, MsgType::kError);
}

TEST_F(ServiceUploadTest, CompleteWindowWithoutPeersFailsAfterReadyTimeout) {
  PartyService svc(config, peers, store);
  Replies r;
  Envelope e = upload_envelope(sid(6), column_words(24, 6));
  e.slots = 24;
  svc.handle(e, r.fn());
  Envelope await;
  await.session = sid(6);
  await.type = MsgType::kAck;
  await.op = transport::kOpAwaitLabel;
  await.seq = transport::kSeqAwaitLabel;
  std::promise<Envelope> reply;
  svc.handle(await, [&](const Envelope& x) { reply.set_value(x); });
  auto f = reply.get_future();
  ASSERT_EQ(f.wait_for(std::chrono::seconds(10)), std::future_status::ready);
  EXPECT_EQ(f.get().type, MsgType::kError);
  svc.drain();
  const auto s = svc.session(sid(6));
  EXPECT_EQ(s->status, SessionStatus::kFailed);
  EXPECT_FALSE(s->reason.empty());
  const auto results = store.recover().results;
  ASSERT_EQ(results.size(), 1u);
  EXPECT_FALSE(results[0].label);
}

TEST_F(ServiceUploadTest, RecoverRestoresAwaitingSessionsAndOutcomes) {
  TempDir dir;
  const std::string path = dir.file("p.ndjson");
  config.window_size = 3;
  {
    LogStore log(path);
    PartyService svc(config, peers, log);
    Replies r;
    Envelope e = upload_envelope(sid(7), column_words(3, 7));
    e.complete = false;
    svc.handle(e, r.fn());
    log.append(StoredResult{sid(8), 0, ""});
  }
  LogStore log(path);
  PartyService svc(config, peers, log);
  EXPECT_EQ(svc.recover(), 0u);
  const auto awaiting = svc.session(sid(7));
  ASSERT_TRUE(awaiting);
  EXPECT_EQ(awaiting->status, SessionStatus::kAwaitingData);
  EXPECT_EQ(awaiting->samples, 3u);
  const auto done = svc.session(sid(8));
  ASSERT_TRUE(done);
  EXPECT_EQ(done->status, SessionStatus::kDone);
  ASSERT_TRUE(done->report);
  EXPECT_EQ(done->report->label, 0);
}

TEST(ConfigHashTest, DependsOnSessionParameters) {
  const PartyConfig a = derivative_svm();
  PartyConfig b = a;
  b.id = 2;
  b.ready_timeout = std::chrono::milliseconds(5);
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.model.bias += 1e-3;
  EXPECT_NE(config_hash(a), config_hash(b));
  PartyConfig c = a;
  c.feature_kind = features::FeatureKind::kSmartfall;
  EXPECT_NE(config_hash(a), config_hash(c));
  PartyConfig d = a;
  d.codec = FixedPointCodec(Field::mersenne61());
  EXPECT_NE(config_hash(a), config_hash(d));
}

// Windows the plaintext model classifies with a clear margin.
std::vector<device::LabeledWindow> decisive_windows(const PartyConfig& config, std::size_t n) {
  harness::CorpusOptions opt;
  opt.windows = 200;
  opt.seed = 99;
  std::vector<device::LabeledWindow> out;
  for (const auto& w : harness::corpus_windows(opt)) {
    const auto x = features::oracle_features(w.window, config.feature_kind);
    if (std::abs(classifiers::oracle_margin(x, config.model)) > 0.5) out.push_back(w);
    if (out.size() == n) break;
  }
  return out;
}

TEST(ClusterTest, PartiesAgreeWithTheOracleAndReportTimings) {
  harness::ClusterOptions opt;
  opt.party = derivative_svm();
  opt.party.keep_transcripts = true;
  opt.seed = 17;
  harness::LocalCluster cluster(opt);
  std::stringstream timing;
  PartyService::write_timing_header(timing);
  cluster.party(1).set_timing_sink(&timing);

  const auto windows = decisive_windows(opt.party, 6);
  ASSERT_EQ(windows.size(), 6u);
  int falls = 0;
  for (const auto& w : windows) {
    const auto r = cluster.device().classify(w.window);
    const int oracle = classifiers::oracle_infer(
        features::oracle_features(w.window, opt.party.feature_kind), opt.party.model);
    EXPECT_EQ(r.label, oracle);
    falls += r.label;
    for (const auto& rep : r.reports) {
      EXPECT_GT(rep.fe_rounds, 0u);
      EXPECT_GT(rep.in_rounds, 0u);
      EXPECT_EQ(rep.open_rounds, 1u);
      EXPECT_GT(rep.fe_us + rep.in_us, 0u);
    }
    for (transport::NodeId p = 1; p <= 3; ++p) {
      cluster.party(p).drain();
      const auto s = cluster.party(p).session(r.session);
      ASSERT_TRUE(s);
      EXPECT_EQ(s->status, SessionStatus::kDone);
      EXPECT_EQ(s->total_rounds, s->report->total_rounds());
    }
  }
  EXPECT_GT(falls, 0);
  EXPECT_LT(falls, 6);

  std::string header, line;
  std::getline(timing, header);
  EXPECT_EQ(header, "session_id,fe_rounds,in_rounds,fe_ms,in_ms,label");
  std::size_t rows = 0;
  while (std::getline(timing, line)) ++rows;
  EXPECT_EQ(rows, 6u);
}

TEST(ClusterTest, OnlyMaskedValuesAndTheLabelAreOpened) {
  harness::ClusterOptions opt;
  opt.party = derivative_svm();
  opt.party.keep_transcripts = true;
  harness::LocalCluster cluster(opt);
  const auto windows = decisive_windows(opt.party, 2);
  for (const auto& w : windows) {
    const auto r = cluster.device().classify(w.window);
    for (transport::NodeId p = 1; p <= 3; ++p) {
      cluster.party(p).drain();
      const auto s = cluster.party(p).session(r.session);
      std::size_t outputs = 0;
      for (const auto& o : s->opens) {
        ASSERT_NE(o.kind, mpc::OpenKind::kDebug);
        if (o.kind == mpc::OpenKind::kOutput) {
          ++outputs;
          ASSERT_EQ(o.values.size(), 1u);
          EXPECT_EQ(o.values[0].value(), static_cast<unsigned>(r.label));
        }
      }
      EXPECT_EQ(outputs, 1u);
    }
  }
}

TEST(ClusterTest, StoredColumnAloneCannotReconstruct) {
  TempDir dir;
  harness::ClusterOptions opt;
  opt.party = derivative_svm();
  opt.store_dir = dir.file("stores");
  {
    harness::LocalCluster cluster(opt);
    cluster.device().classify(decisive_windows(opt.party, 1)[0].window);
  }
  const Field& f = opt.party.codec.field();
  const Recovery r = LogStore(opt.store_dir.value() + "/party2.ndjson").recover();
  ASSERT_EQ(r.uploads.size(), 1u);
  const auto column = f.from_words(r.uploads[0].words);
  ASSERT_EQ(column.size(), 72u);
  for (const auto& v : column) {
    const shamir::Share one[1] = {{2, v}};
    EXPECT_THROW(shamir::reconstruct(f, one, opt.party.engine.policy), InsufficientShares);
  }
}

TEST(ClusterTest, ConfigMismatchFailsTheSessionEverywhere) {
  transport::MemoryBus bus;
  std::vector<std::unique_ptr<MemoryStore>> stores;
  std::vector<std::unique_ptr<transport::Transport>> endpoints;
  std::vector<std::unique_ptr<PartyService>> services;
  for (transport::NodeId p = 1; p <= 3; ++p) {
    PartyConfig c = derivative_svm();
    c.id = p;
    c.ready_timeout = std::chrono::milliseconds(5000);
    if (p == 3) c.model.bias += 0.25;
    stores.push_back(std::make_unique<MemoryStore>());
    endpoints.push_back(bus.endpoint(p));
    services.push_back(std::make_unique<PartyService>(c, *endpoints.back(), *stores.back()));
    PartyService* svc = services.back().get();
    bus.attach(p, [svc, &bus, p](Envelope e) {
      const auto to = e.sender;
      svc->handle(std::move(e), [&bus, p, to](const Envelope& r) { bus.send(p, to, r); });
    });
  }
  {
    device::BusPort port(bus);
    std::vector<std::unique_ptr<device::PartyLink>> links;
    for (transport::NodeId p = 1; p <= 3; ++p) links.push_back(port.link(p));
    SeededRandom rng(3);
    device::DeviceOptions dopt;
    dopt.timeout = std::chrono::milliseconds(10000);
    device::DeviceClient client(FixedPointCodec{Field::mersenne127()}, std::move(links), rng, dopt);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(client.classify(decisive_windows(derivative_svm(), 1)[0].window), RemoteError);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
  }
  for (auto& s : services) {
    s->drain();
    const auto all = s->sessions();
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all[0].status, SessionStatus::kFailed);
    EXPECT_NE(all[0].reason.find("config"), std::string::npos) << all[0].reason;
  }
  for (transport::NodeId p = 1; p <= 3; ++p) bus.detach(p);
}

TEST(ClusterTest, TcpWithTlsMatchesTheOracle) {
  harness::ClusterOptions opt;
  opt.mode = harness::TransportMode::kTcp;
  opt.tls_dir = std::string(FALLDET_FIXTURE_DIR) + "/tls";
  opt.party = derivative_svm();
  harness::LocalCluster cluster(opt);
  for (const auto& w : decisive_windows(opt.party, 2)) {
    const auto r = cluster.device().classify(w.window);
    EXPECT_EQ(r.label, classifiers::oracle_infer(
                           features::oracle_features(w.window, opt.party.feature_kind),
                           opt.party.model));
  }
}

}  // namespace
}  // namespace falldet::party
