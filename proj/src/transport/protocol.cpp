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


#include "falldet/transport/protocol.hpp"

#include <string>

#include "falldet/error.hpp"

namespace falldet::transport {

std::vector<std::uint64_t> LabelReport::to_payload() const {
  return {static_cast<std::uint64_t>(label), fe_rounds, in_rounds, open_rounds, fe_us, in_us,
          open_us};
}

LabelReport LabelReport::from_payload(std::span<const std::uint64_t> words) {
  if (words.size() != 7) {
    throw ParseError("label_result: expected 7 payload words, got " +
                     std::to_string(words.size()));
  }
  if (words[0] > 1) throw ParseError("label_result: label is not a bit");
  LabelReport r;
  r.label = static_cast<int>(words[0]);
  r.fe_rounds = words[1];
  r.in_rounds = words[2];
  r.open_rounds = words[3];
  r.fe_us = words[4];
  r.in_us = words[5];
  r.open_us = words[6];
  return r;
}

}  // namespace falldet::transport
