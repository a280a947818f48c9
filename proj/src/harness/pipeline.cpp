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


#include "falldet/harness/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <thread>

#include "falldet/error.hpp"

namespace falldet::harness {

namespace {

using Clock = std::chrono::steady_clock;

}  // namespace

PipelineReport run_pipeline(std::span<const device::LabeledWindow> windows,
                            const ClusterOptions& options) {
  const auto start = Clock::now();
  PipelineReport r;
  r.features = features::to_string(options.party.feature_kind);
  r.classifier = classifiers::to_string(options.party.model.kind);
  r.mode = to_string(options.mode);
  LocalCluster cluster(options);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    WindowOutcome o;
    o.index = i;
    o.truth = windows[i].label.value_or(-1);
    const auto x = features::oracle_features(windows[i].window, options.party.feature_kind,
                                             options.party.window_size);
    o.margin = classifiers::oracle_margin(x, options.party.model);
    o.oracle = classifiers::oracle_infer(x, options.party.model);
    try {
      o.result = cluster.device().classify(windows[i].window);
      o.mpc = o.result.label;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    if (o.mpc < 0) {
      ++r.failures;
    } else {
      ++r.completed;
      if (o.mpc == o.oracle) {
        ++r.agreements;
      } else {
        r.max_mismatch_margin = std::max(r.max_mismatch_margin, std::abs(o.margin));
      }
      if (o.truth >= 0) r.mpc_vs_truth.add(o.mpc, o.truth);
    }
    if (o.truth >= 0) r.oracle_vs_truth.add(o.oracle, o.truth);
    r.windows.push_back(std::move(o));
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

void write_report(std::ostream& out, const PipelineReport& r) {
  out << "features=" << r.features << " classifier=" << r.classifier << " transport=" << r.mode
      << " windows=" << r.windows.size() << (r.incomplete() ? " INCOMPLETE" : "") << "\n";
  const Confusion& c = r.mpc_vs_truth;
  out << "  mpc    " << format_metrics(metrics_from(c)) << " tp=" << c.tp << " fp=" << c.fp
      << " tn=" << c.tn << " fn=" << c.fn << "\n";
  const Confusion& o = r.oracle_vs_truth;
  out << "  oracle " << format_metrics(metrics_from(o)) << " tp=" << o.tp << " fp=" << o.fp
      << " tn=" << o.tn << " fn=" << o.fn << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "  agreement=%.4f (%zu/%zu) failures=%zu max_mismatch_margin=%.3g time=%.1fs\n",
                r.agreement(), r.agreements, r.completed, r.failures, r.max_mismatch_margin,
                r.seconds);
  out << buf;
  double fe = 0, in = 0, total = 0;
  std::uint64_t fe_r = 0, in_r = 0, open_r = 0;
  std::size_t n = 0;
  for (const auto& w : r.windows) {
    if (w.mpc < 0 || w.result.reports.empty()) continue;
    const auto& rep = w.result.reports.front();
    fe += rep.fe_us / 1000.0;
    in += rep.in_us / 1000.0;
    total += w.result.total_ms;
    fe_r = rep.fe_rounds;
    in_r = rep.in_rounds;
    open_r = rep.open_rounds;
    ++n;
  }
  if (n > 0) {
    std::snprintf(buf, sizeof buf,
                  "  rounds fe=%llu in=%llu open=%llu  mean ms fe=%.2f in=%.2f total=%.2f\n",
                  static_cast<unsigned long long>(fe_r), static_cast<unsigned long long>(in_r),
                  static_cast<unsigned long long>(open_r), fe / n, in / n, total / n);
    out << buf;
  }
}

void write_windows_csv(std::ostream& out, const PipelineReport& r) {
  out << "index,truth,mpc,oracle,margin,fe_rounds,in_rounds,open_rounds,fe_ms,in_ms,share_ms,"
         "upload_ms,total_ms,error\n";
  for (const auto& w : r.windows) {
    transport::LabelReport rep;
    if (!w.result.reports.empty()) rep = w.result.reports.front();
    std::string error = w.error;
    for (char& ch : error) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    out << w.index << ',' << w.truth << ',' << w.mpc << ',' << w.oracle << ','
        << std::setprecision(9) << w.margin << ',' << rep.fe_rounds << ',' << rep.in_rounds
        << ',' << rep.open_rounds << ',' << std::fixed << std::setprecision(3)
        << rep.fe_us / 1000.0 << ',' << rep.in_us / 1000.0 << ',' << w.result.share_ms << ','
        << w.result.upload_ms << ',' << w.result.total_ms << ',' << error << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

RoundTable benchmark_rounds(const party::PartyConfig& config) {
  const std::size_t n = config.engine.policy.parties;
  const Field& field = config.codec.field();
  // Shares of an all-zero window; the schedule does not depend on data.
  const std::vector<FieldElement> column(3 * config.window_size, field.zero());
  mpc::LocalHub hub(n);
  std::vector<transport::LabelReport> reports(n);
  std::vector<std::map<std::string, std::uint64_t>> per_op(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (shamir::PartyIndex p = 1; p <= n; ++p) {
    threads.emplace_back([&, p] {
      try {
        SeededRandom rng(p);
        mpc::Engine engine(config.codec, config.engine, p, hub.channel(p), rng);
        reports[p - 1] = party::evaluate_window(engine, column, config.feature_kind,
                                                config.window_size, config.model,
                                                config.inference);
        per_op[p - 1] = engine.counter().per_op();
      } catch (...) {
        errors[p - 1] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  RoundTable t;
  t.fe = reports[0].fe_rounds;
  t.in = reports[0].in_rounds;
  t.open = reports[0].open_rounds;
  t.per_op = per_op[0];
  return t;
}

std::vector<LatencyRow> compare_latency(std::span<const device::LabeledWindow> windows,
                                        const ClusterOptions& options,
                                        std::span<const std::chrono::milliseconds> delays) {
  if (options.mode != TransportMode::kMemory) {
    throw ConfigError("latency injection needs the in-memory transport");
  }
  std::vector<LatencyRow> rows;
  for (const auto delay : delays) {
    ClusterOptions o = options;
    const std::chrono::microseconds d = delay;
    o.bus.link_delay = [d](transport::NodeId from, transport::NodeId to) {
      return from != transport::kDeviceId && to != transport::kDeviceId
                 ? d
                 : std::chrono::microseconds(0);
    };
    LocalCluster cluster(o);
    LatencyRow row;
    row.delay_ms = static_cast<double>(delay.count());
    // One untimed window warms up threads and connections.
    cluster.device().classify(windows.front().window);
    for (const auto& w : windows) {
      const auto result = cluster.device().classify(w.window);
      const auto& rep = result.reports.front();
      row.total_ms += result.total_ms;
      row.fe_ms += rep.fe_us / 1000.0;
      row.in_ms += rep.in_us / 1000.0;
      row.rounds = rep.total_rounds();
      ++row.windows;
    }
    row.total_ms /= static_cast<double>(row.windows);
    row.fe_ms /= static_cast<double>(row.windows);
    row.in_ms /= static_cast<double>(row.windows);
    row.predicted_ms = static_cast<double>(row.rounds + 1) * row.delay_ms;
    rows.push_back(row);
  }
  for (auto& row : rows) row.network_ms = row.total_ms - rows.front().total_ms;
  return rows;
}

void write_latency(std::ostream& out, std::span<const LatencyRow> rows) {
  out << "delay_ms,windows,rounds,total_ms,fe_ms,in_ms,network_ms,predicted_ms\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.1f,%zu,%llu,%.2f,%.2f,%.2f,%.2f,%.2f\n", r.delay_ms,
                  r.windows, static_cast<unsigned long long>(r.rounds), r.total_ms, r.fe_ms,
                  r.in_ms, r.network_ms, r.predicted_ms);
    out << buf;
  }
}

}  // namespace falldet::harness
