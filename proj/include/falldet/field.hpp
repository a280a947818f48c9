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

#ifndef FALLDET_FIELD_HPP_
#define FALLDET_FIELD_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace falldet {

using u128 = unsigned __int128;
using i128 = __int128;

// An element of a prime field. The value is always canonical, i.e. in
// [0, P) for the Field that produced it. Elements do not carry their modulus;
// arithmetic goes through a Field.
class FieldElement {
 public:
  constexpr FieldElement() = default;

  constexpr u128 value() const { return value_; }
  constexpr bool is_zero() const { return value_ == 0; }

  friend constexpr bool operator==(FieldElement a, FieldElement b) {
    return a.value_ == b.value_;
  }

 private:
  friend class Field;
  constexpr explicit FieldElement(u128 v) : value_(v) {}

  u128 value_ = 0;
};

// Prime field F_P. Supported moduli: any prime below 2^64, and the Mersenne
// prime 2^127 - 1. The two Mersenne primes 2^61 - 1 and 2^127 - 1 use fast
// reduction.
class Field {
 public:
  explicit Field(u128 modulus);

  static Field mersenne61();
  static Field mersenne127();

  u128 modulus() const { return p_; }
  // Bit length of P.
  int bits() const { return bits_; }
  // Number of 8-byte words one serialized element occupies (1 or 2).
  std::size_t words() const { return bits_ <= 64 ? 1 : 2; }

  // Reduces v modulo P.
  FieldElement element(u128 v) const;
  // Maps a signed integer into the field; negatives land in the upper half.
  FieldElement from_signed(i128 v) const;
  // Inverse of from_signed: values above P/2 are returned as negatives.
  i128 to_signed(FieldElement e) const;

  FieldElement zero() const { return FieldElement(0); }
  FieldElement one() const { return FieldElement(1); }

  FieldElement add(FieldElement a, FieldElement b) const;
  FieldElement sub(FieldElement a, FieldElement b) const;
  FieldElement neg(FieldElement a) const;
  FieldElement mul(FieldElement a, FieldElement b) const;
  FieldElement pow(FieldElement a, u128 exponent) const;
  // Multiplicative inverse; throws MalformedInput for zero.
  FieldElement inv(FieldElement a) const;
  // Inverts every element in place with a single field inversion.
  void batch_inv(std::span<FieldElement> values) const;
  // A square root of a if one exists. The smaller of the two roots is
  // returned so every caller derives the same value.
  std::optional<FieldElement> sqrt(FieldElement a) const;

  // 2^k as a field element.
  FieldElement pow2(int k) const;

  // Serialization: little-endian 8-byte words, low word first.
  void append_words(FieldElement e, std::vector<std::uint64_t>& out) const;
  // Reads one element starting at words[offset]; rejects non-canonical values.
  FieldElement read_words(std::span<const std::uint64_t> words,
                          std::size_t offset) const;
  std::vector<std::uint64_t> to_words(std::span<const FieldElement> values) const;
  std::vector<FieldElement> from_words(std::span<const std::uint64_t> words) const;

  friend bool operator==(const Field& a, const Field& b) { return a.p_ == b.p_; }

 private:
  enum class Reduction { kGeneric64, kMersenne61, kMersenne127 };

  u128 p_;
  int bits_;
  Reduction reduction_;
};

// Decimal rendering of a 128-bit unsigned value.
std::string to_string(u128 v);

}  // namespace falldet

#endif  // FALLDET_FIELD_HPP_
