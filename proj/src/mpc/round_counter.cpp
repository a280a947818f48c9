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

#include "falldet/mpc/round_counter.hpp"

namespace falldet::mpc {

void RoundCounter::record_round(const std::string& op, std::uint64_t messages) {
  ++rounds_;
  messages_ += messages;
  ++per_op_[op];
  ++per_phase_[phase_];
}

std::uint64_t RoundCounter::phase_rounds(const std::string& phase) const {
  auto it = per_phase_.find(phase);
  return it == per_phase_.end() ? 0 : it->second;
}

}  // namespace falldet::mpc
