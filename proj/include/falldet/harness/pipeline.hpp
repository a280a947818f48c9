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


#ifndef FALLDET_HARNESS_PIPELINE_HPP_
#define FALLDET_HARNESS_PIPELINE_HPP_

#include <chrono>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "falldet/harness/cluster.hpp"
#include "falldet/harness/metrics.hpp"

namespace falldet::harness {

struct WindowOutcome {
  std::size_t index = 0;
  int truth = -1;  // -1 for unlabeled windows
  int mpc = -1;    // -1 when the session failed
  int oracle = 0;
  double margin = 0;
  device::WindowResult result;
  std::string error;
};

struct PipelineReport {
  std::string features;
  std::string classifier;
  std::string mode;
  std::vector<WindowOutcome> windows;
  Confusion mpc_vs_truth;
  Confusion oracle_vs_truth;
  std::size_t agreements = 0;
  std::size_t completed = 0;
  std::size_t failures = 0;
  // Largest |oracle margin| among windows where MPC and oracle disagree.
  double max_mismatch_margin = 0;
  double seconds = 0;

  bool incomplete() const { return failures > 0; }
  double agreement() const {
    return completed == 0 ? 0 : static_cast<double>(agreements) / static_cast<double>(completed);
  }
};

// Classifies every window through a fresh cluster and compares the labels
// with the plaintext oracle and the ground truth.
PipelineReport run_pipeline(std::span<const device::LabeledWindow> windows,
                            const ClusterOptions& options);

void write_report(std::ostream& out, const PipelineReport& r);
// Per-window CSV: index,truth,mpc,oracle,margin,fe_rounds,in_rounds,
// open_rounds,fe_ms,in_ms,share_ms,upload_ms,total_ms,error
void write_windows_csv(std::ostream& out, const PipelineReport& r);

// Static round counts of one session, per phase and per operation, from a
// run over an in-process hub.
struct RoundTable {
  std::uint64_t fe = 0;
  std::uint64_t in = 0;
  std::uint64_t open = 0;
  std::map<std::string, std::uint64_t> per_op;
  std::uint64_t total() const { return fe + in + open; }
};

RoundTable benchmark_rounds(const party::PartyConfig& config);

struct LatencyRow {
  double delay_ms = 0;
  std::size_t windows = 0;
  double total_ms = 0;  // mean device-side time per window
  double fe_ms = 0;
  double in_ms = 0;
  std::uint64_t rounds = 0;
  // total_ms minus the zero-delay total_ms of the same run.
  double network_ms = 0;
  // One delay per round plus one for the readiness exchange.
  double predicted_ms = 0;
};

// Mean per-window latency with a symmetric delay on every party-to-party
// link (device links undelayed); the first delay is the baseline.
std::vector<LatencyRow> compare_latency(std::span<const device::LabeledWindow> windows,
                                        const ClusterOptions& options,
                                        std::span<const std::chrono::milliseconds> delays);

void write_latency(std::ostream& out, std::span<const LatencyRow> rows);

}  // namespace falldet::harness

#endif  // FALLDET_HARNESS_PIPELINE_HPP_
