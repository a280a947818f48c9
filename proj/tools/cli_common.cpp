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


#include "cli_common.hpp"

#include "falldet/error.hpp"

namespace falldet::cli {

std::string default_model_path(const std::string& features, const std::string& classifier) {
  return std::string(FALLDET_MODEL_DIR) + "/" + features + "_" + classifier + ".json";
}

party::PartyConfig party_config(const std::string& features, const std::string& classifier,
                                const std::string& model_path, std::size_t window,
                                const std::string& weights) {
  party::PartyConfig c;
  c.feature_kind = features::parse_feature_kind(features);
  c.window_size = window;
  const std::string path = model_path.empty() ? default_model_path(features, classifier) : model_path;
  c.model = classifiers::load_model_file(path, c.codec, window);
  if (c.model.kind != classifiers::parse_model_kind(classifier)) {
    throw ConfigError(path + " holds a " + std::string(classifiers::to_string(c.model.kind)) +
                      " model, not " + classifier);
  }
  if (c.model.feature_kind != c.feature_kind) {
    throw ConfigError(path + " was built for " +
                      std::string(features::to_string(c.model.feature_kind)) + " features");
  }
  if (weights == "public") {
    c.inference.weights = classifiers::WeightMode::kPublic;
  } else if (weights == "shared") {
    c.inference.weights = classifiers::WeightMode::kShared;
  } else {
    throw ConfigError("--weights must be public or shared");
  }
  return c;
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ConfigError("expected host:port, got '" + text + "'");
  const std::string port = text.substr(colon + 1);
  int value = -1;
  try {
    std::size_t used = 0;
    value = std::stoi(port, &used);
    if (used != port.size()) value = -1;
  } catch (const std::exception&) {
  }
  if (value < 0 || value > 65535) throw ConfigError("bad port in '" + text + "'");
  return {text.substr(0, colon), static_cast<std::uint16_t>(value)};
}

std::shared_ptr<transport::TlsContext> client_tls(const transport::PeerConfig& peers) {
  if (!peers.tls) return nullptr;
  std::vector<std::string> certs;
  for (const auto& p : peers.parties) certs.push_back(p.cert);
  return transport::TlsContext::client(certs);
}

}  // namespace falldet::cli
