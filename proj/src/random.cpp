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

#include "falldet/random.hpp"

#include <openssl/rand.h>

#include "falldet/error.hpp"

namespace falldet {

FieldElement RandomSource::uniform(const Field& field) {
  const int bits = field.bits();
  const u128 mask = bits >= 128 ? ~u128{0} : (u128{1} << bits) - 1;
  for (;;) {
    u128 v = next_u64();
    if (bits > 64) v |= static_cast<u128>(next_u64()) << 64;
    v &= mask;
    if (v < field.modulus()) return field.element(v);
  }
}

u128 RandomSource::uniform_bits(int bits) {
  if (bits <= 0) return 0;
  if (bits > 127) throw RangeError("uniform_bits supports at most 127 bits");
  u128 v = next_u64();
  if (bits > 64) v |= static_cast<u128>(next_u64()) << 64;
  return v & ((u128{1} << bits) - 1);
}

std::uint64_t SystemRandom::next_u64() {
  if (next_ == buffer_.size()) {
    buffer_.resize(512);
    if (RAND_bytes(reinterpret_cast<unsigned char*>(buffer_.data()),
                   static_cast<int>(buffer_.size() * sizeof(std::uint64_t))) != 1) {
      throw TransientError("system entropy source failed");
    }
    next_ = 0;
  }
  return buffer_[next_++];
}

}  // namespace falldet
