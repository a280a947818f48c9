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


#ifndef FALLDET_TOOLS_CLI_COMMON_HPP_
#define FALLDET_TOOLS_CLI_COMMON_HPP_

#include <cstdint>
#include <string>
#include <utility>

#include "falldet/party/service.hpp"

namespace falldet::cli {

// Model files shipped with the source tree.
std::string default_model_path(const std::string& features, const std::string& classifier);

// Loads the model and checks it against --features / --classifier.
party::PartyConfig party_config(const std::string& features, const std::string& classifier,
                                const std::string& model_path, std::size_t window,
                                const std::string& weights);

// "host:port"; throws ConfigError.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& text);

// Certificates of every party in the table, as a client trust store;
// null when the table does not use TLS.
std::shared_ptr<transport::TlsContext> client_tls(const transport::PeerConfig& peers);

}  // namespace falldet::cli

#endif  // FALLDET_TOOLS_CLI_COMMON_HPP_
