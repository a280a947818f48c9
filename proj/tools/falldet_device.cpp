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


#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cli_common.hpp"
#include "falldet/device/client.hpp"
#include "falldet/error.hpp"

int main(int argc, char** argv) {
  using namespace falldet;
  CLI::App app{"falldet-device: share windows and collect labels"};
  std::string input, peers_path, features = "derivative", classifier = "svm", timing_out;
  std::size_t window = features::kDefaultWindowSize, stride = features::kDefaultWindowSize;
  double rate = features::kDefaultRateHz;
  int timeout_s = 120;
  app.add_option("--input", input, "CSV with timestamp,ax,ay,az[,label]")->required();
  app.add_option("--parties", peers_path, "party table (FALLDET_PEERS overrides)");
  app.add_option("--window", window, "samples per window");
  app.add_option("--stride", stride, "records between window starts");
  app.add_option("--rate", rate, "sampling rate in Hz");
  app.add_option("--features", features, "smartfall|derivative (must match the parties)");
  app.add_option("--classifier", classifier, "lr|svm|nb (must match the parties)");
  app.add_option("--timing-out", timing_out, "per-window timing CSV");
  app.add_option("--timeout", timeout_s, "per-request timeout, seconds");
  CLI11_PARSE(app, argc, argv);

  try {
    features::parse_feature_kind(features);
    classifiers::parse_model_kind(classifier);
    const std::string path = transport::resolve_peer_config_path(peers_path);
    if (path.empty()) throw ConfigError("no party table: pass --parties or set FALLDET_PEERS");
    const transport::PeerConfig peers = transport::PeerConfig::load(path);
    const auto records = device::read_csv_file(input);
    const auto windows = device::make_windows(records, window, stride, rate);

    SystemRandom rng;
    device::DeviceOptions options;
    options.timeout = std::chrono::seconds(timeout_s);
    device::DeviceClient client(FixedPointCodec(Field::mersenne127()),
                                device::tcp_links(peers, cli::client_tls(peers)), rng, options);
    std::ofstream timing;
    if (!timing_out.empty()) {
      timing.open(timing_out);
      device::write_timing_header(timing);
    }
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto r = client.classify(windows[i].window);
      std::cout << "window " << i << " label " << r.label;
      if (windows[i].label) std::cout << " truth " << *windows[i].label;
      std::cout << " total_ms " << r.total_ms << '\n';
      if (timing.is_open()) device::write_timing_row(timing, r);
    }
  } catch (const falldet::Error& e) {
    std::cerr << "falldet-device: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
