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

#ifndef FALLDET_MPC_ROUND_COUNTER_HPP_
#define FALLDET_MPC_ROUND_COUNTER_HPP_

#include <cstdint>
#include <map>
#include <string>

namespace falldet::mpc {

// Communication cost of one session. A round is one exchange in which every
// party sends one message to every peer. Local operations never touch it.
class RoundCounter {
 public:
  void record_round(const std::string& op, std::uint64_t messages);

  std::uint64_t rounds() const { return rounds_; }
  std::uint64_t messages() const { return messages_; }
  const std::map<std::string, std::uint64_t>& per_op() const { return per_op_; }
  const std::map<std::string, std::uint64_t>& per_phase() const { return per_phase_; }

  // Rounds recorded from now on are attributed to `phase`.
  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const { return phase_; }
  std::uint64_t phase_rounds(const std::string& phase) const;

 private:
  std::uint64_t rounds_ = 0;
  std::uint64_t messages_ = 0;
  std::string phase_ = "default";
  std::map<std::string, std::uint64_t> per_op_;
  std::map<std::string, std::uint64_t> per_phase_;
};

}  // namespace falldet::mpc

#endif  // FALLDET_MPC_ROUND_COUNTER_HPP_
