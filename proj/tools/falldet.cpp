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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli_common.hpp"
#include "falldet/error.hpp"
#include "falldet/harness/corpus.hpp"
#include "falldet/harness/pipeline.hpp"

namespace {

using namespace falldet;

std::vector<std::string> expand(const std::string& value, std::vector<std::string> all) {
  if (value == "all") return all;
  return {value};
}

std::vector<device::LabeledWindow> load_windows(const std::string& input, std::size_t windows,
                                                std::uint64_t seed, std::size_t window,
                                                std::size_t stride, double rate) {
  if (!input.empty()) {
    const auto records = device::read_csv_file(input);
    return device::make_windows(records, window, stride, rate);
  }
  harness::CorpusOptions c;
  c.windows = windows;
  c.seed = seed;
  c.window_len = window;
  c.rate_hz = rate;
  return harness::corpus_windows(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"falldet: secret-shared fall detection harness"};
  app.require_subcommand(1);

  std::string features = "derivative", classifier = "svm", model, weights = "public";
  std::size_t window = features::kDefaultWindowSize, stride = features::kDefaultWindowSize;
  double rate = features::kDefaultRateHz;
  std::uint64_t seed = 2026;
  std::size_t windows = 1000;
  std::string input;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--features", features, "smartfall|derivative|all");
    sub->add_option("--classifier", classifier, "lr|svm|nb|all");
    sub->add_option("--model", model, "model file (default: bundled model)");
    sub->add_option("--window", window, "samples per window");
    sub->add_option("--weights", weights, "public|shared model weights");
  };

  auto* run = app.add_subcommand("run", "classify a corpus through three parties");
  add_common(run);
  std::string transport_mode = "memory", report_csv, store_dir, tls_dir;
  double delay_ms = 0;
  run->add_option("--transport", transport_mode, "memory|tcp");
  run->add_option("--windows", windows, "synthetic corpus size");
  run->add_option("--seed", seed, "corpus and protocol seed");
  run->add_option("--input", input, "CSV corpus instead of the synthetic one");
  run->add_option("--stride", stride, "records between window starts");
  run->add_option("--rate", rate, "sampling rate in Hz");
  run->add_option("--report-csv", report_csv, "per-window CSV output");
  run->add_option("--store", store_dir, "directory for party share logs");
  run->add_option("--tls-dir", tls_dir, "party<i>.crt/.key directory (tcp only)");
  run->add_option("--delay-ms", delay_ms, "injected party-to-party delay (memory only)");

  auto* rounds = app.add_subcommand("bench-rounds", "static round counts per phase");
  add_common(rounds);

  auto* latency = app.add_subcommand("bench-latency", "latency under injected peer delay");
  add_common(latency);
  std::vector<int> delays{0, 10, 20};
  std::size_t latency_windows = 5;
  latency->add_option("--delays", delays, "delays in ms; the first is the baseline")->delimiter(',');
  latency->add_option("--windows", latency_windows, "windows per delay");
  latency->add_option("--seed", seed, "corpus seed");

  auto* fit = app.add_subcommand("fit", "fit reference models on a synthetic corpus");
  std::string out_dir;
  std::size_t fit_windows = 2000;
  std::uint64_t fit_seed = 7;
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--windows", fit_windows, "training windows");
  fit->add_option("--seed", fit_seed, "training corpus seed");

  auto* corpus = app.add_subcommand("corpus", "write the synthetic corpus as CSV");
  std::string corpus_out;
  corpus->add_option("--out", corpus_out, "CSV path")->required();
  corpus->add_option("--windows", windows, "windows");
  corpus->add_option("--seed", seed, "seed");

  CLI11_PARSE(app, argc, argv);

  const std::vector<std::string> all_features{"smartfall", "derivative"};
  const std::vector<std::string> all_classifiers{"lr", "svm", "nb"};
  try {
    if (*run) {
      const auto ws = load_windows(input, windows, seed, window, stride, rate);
      std::ofstream csv;
      if (!report_csv.empty()) csv.open(report_csv);
      bool incomplete = false;
      for (const auto& fk : expand(features, all_features)) {
        for (const auto& ck : expand(classifier, all_classifiers)) {
          harness::ClusterOptions o;
          o.mode = harness::parse_transport_mode(transport_mode);
          o.party = cli::party_config(fk, ck, model, window, weights);
          o.seed = seed;
          if (!store_dir.empty()) o.store_dir = store_dir + "/" + fk + "_" + ck;
          if (!tls_dir.empty()) o.tls_dir = tls_dir;
          if (delay_ms > 0) {
            o.bus.delay = std::chrono::microseconds(static_cast<long long>(delay_ms * 1000));
          }
          const auto report = harness::run_pipeline(ws, o);
          harness::write_report(std::cout, report);
          if (csv.is_open()) harness::write_windows_csv(csv, report);
          incomplete = incomplete || report.incomplete();
        }
      }
      return incomplete ? 2 : 0;
    }
    if (*rounds) {
      std::cout << "features,classifier,fe_rounds,in_rounds,open_rounds,total\n";
      std::map<std::string, std::uint64_t> fe;
      for (const auto& fk : expand(features, all_features)) {
        for (const auto& ck : expand(classifier, all_classifiers)) {
          const auto t = harness::benchmark_rounds(cli::party_config(fk, ck, model, window, weights));
          fe[fk] = t.fe;
          std::cout << fk << ',' << ck << ',' << t.fe << ',' << t.in << ',' << t.open << ','
                    << t.total() << '\n';
        }
      }
      if (fe.count("smartfall") && fe.count("derivative")) {
        std::cout << "fe round ratio smartfall/derivative = "
                  << static_cast<double>(fe["smartfall"]) / static_cast<double>(fe["derivative"])
                  << '\n';
      }
      return 0;
    }
    if (*latency) {
      harness::CorpusOptions c;
      c.windows = latency_windows;
      c.seed = seed;
      c.window_len = window;
      const auto ws = harness::corpus_windows(c);
      std::vector<std::chrono::milliseconds> ds;
      for (int d : delays) ds.emplace_back(d);
      for (const auto& fk : expand(features, all_features)) {
        for (const auto& ck : expand(classifier, all_classifiers)) {
          harness::ClusterOptions o;
          o.party = cli::party_config(fk, ck, model, window, weights);
          std::cout << "# " << fk << " + " << ck << '\n';
          harness::write_latency(std::cout, harness::compare_latency(ws, o, ds));
        }
      }
      return 0;
    }
    if (*fit) {
      harness::CorpusOptions c;
      c.windows = fit_windows;
      c.seed = fit_seed;
      const auto ws = harness::corpus_windows(c);
      std::filesystem::create_directories(out_dir);
      for (const auto& fk : all_features) {
        const auto kind = features::parse_feature_kind(fk);
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& w : ws) {
          x.push_back(features::oracle_features(w.window, kind));
          y.push_back(w.label.value_or(0));
        }
        for (const auto& ck : all_classifiers) {
          const auto m = harness::fit_model(classifiers::parse_model_kind(ck), kind, x, y);
          const std::string path = out_dir + "/" + fk + "_" + ck + ".json";
          std::ofstream(path) << classifiers::to_json(m).dump(2) << '\n';
          std::cout << "wrote " << path << '\n';
        }
      }
      return 0;
    }
    if (*corpus) {
      harness::CorpusOptions c;
      c.windows = windows;
      c.seed = seed;
      std::ofstream out(corpus_out);
      const auto records = harness::synthetic_corpus(c);
      device::write_csv(out, records);
      return 0;
    }
  } catch (const falldet::Error& e) {
    std::cerr << "falldet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
