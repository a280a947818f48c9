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

#ifndef FALLDET_RANDOM_HPP_
#define FALLDET_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "falldet/field.hpp"

namespace falldet {

// Entropy source for share coefficients and protocol randomness.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual std::uint64_t next_u64() = 0;

  // Uniform element of the field (rejection sampling over next_u64()).
  virtual FieldElement uniform(const Field& field);
  // Uniform integer in [0, 2^bits), bits <= 127.
  u128 uniform_bits(int bits);
};

// Cryptographic source backed by the OpenSSL DRBG. Used by every production
// code path.
class SystemRandom final : public RandomSource {
 public:
  std::uint64_t next_u64() override;

 private:
  std::vector<std::uint64_t> buffer_;
  std::size_t next_ = 0;
};

// Reproducible source for tests and seeded simulations.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() override { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace falldet

#endif  // FALLDET_RANDOM_HPP_
