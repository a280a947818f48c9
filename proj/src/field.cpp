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

#include "falldet/field.hpp"

#include <algorithm>

#include "falldet/error.hpp"

namespace falldet {
namespace {

constexpr u128 kMersenne61 = (u128{1} << 61) - 1;
constexpr u128 kMersenne127 = (u128{1} << 127) - 1;

std::uint64_t mulmod64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

std::uint64_t powmod64(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  a %= m;
  while (e) {
    if (e & 1) r = mulmod64(r, a, m);
    a = mulmod64(a, a, m);
    e >>= 1;
  }
  return r;
}

// Deterministic Miller-Rabin for 64-bit inputs.
bool is_prime64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    std::uint64_t x = powmod64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod64(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

int bit_length(u128 v) {
  int n = 0;
  while (v) {
    ++n;
    v >>= 1;
  }
  return n;
}

// Full 128x128 -> 256 bit product as (hi, lo).
inline void mul_wide(u128 a, u128 b, u128& hi, u128& lo) {
  const std::uint64_t a0 = static_cast<std::uint64_t>(a);
  const std::uint64_t a1 = static_cast<std::uint64_t>(a >> 64);
  const std::uint64_t b0 = static_cast<std::uint64_t>(b);
  const std::uint64_t b1 = static_cast<std::uint64_t>(b >> 64);
  const u128 p00 = static_cast<u128>(a0) * b0;
  const u128 p01 = static_cast<u128>(a0) * b1;
  const u128 p10 = static_cast<u128>(a1) * b0;
  const u128 p11 = static_cast<u128>(a1) * b1;
  // Operands are below 2^127, so p01 + p10 < 2^128.
  const u128 mid = p01 + p10;
  lo = p00 + (mid << 64);
  const u128 carry = lo < p00 ? 1 : 0;
  hi = p11 + (mid >> 64) + carry;
}

inline u128 reduce127(u128 hi, u128 lo) {
  // 2^127 = 1 (mod P), and hi < 2^126 for a product of reduced operands.
  u128 s = (lo & kMersenne127) + (lo >> 127) + (hi << 1);
  s = (s & kMersenne127) + (s >> 127);
  if (s >= kMersenne127) s -= kMersenne127;
  return s;
}

inline u128 reduce61(u128 x) {
  u128 s = (x & kMersenne61) + (x >> 61);
  s = (s & kMersenne61) + (s >> 61);
  if (s >= kMersenne61) s -= kMersenne61;
  return s;
}

}  // namespace

Field::Field(u128 modulus) : p_(modulus), bits_(bit_length(modulus)) {
  if (modulus == kMersenne127) {
    reduction_ = Reduction::kMersenne127;
  } else if (modulus == kMersenne61) {
    reduction_ = Reduction::kMersenne61;
  } else if (modulus < (u128{1} << 64)) {
    if (!is_prime64(static_cast<std::uint64_t>(modulus))) {
      throw ConfigError("field modulus " + to_string(modulus) + " is not prime");
    }
    reduction_ = Reduction::kGeneric64;
  } else {
    throw ConfigError("unsupported field modulus " + to_string(modulus) +
                      ": use a prime below 2^64 or 2^127-1");
  }
}

Field Field::mersenne61() { return Field(kMersenne61); }
Field Field::mersenne127() { return Field(kMersenne127); }

FieldElement Field::element(u128 v) const {
  switch (reduction_) {
    case Reduction::kMersenne127:
      return FieldElement(reduce127(0, v));
    case Reduction::kMersenne61:
      return FieldElement(reduce61(v));
    case Reduction::kGeneric64:
      break;
  }
  return FieldElement(v % p_);
}

FieldElement Field::from_signed(i128 v) const {
  if (v >= 0) return element(static_cast<u128>(v));
  return neg(element(static_cast<u128>(-v)));
}

i128 Field::to_signed(FieldElement e) const {
  if (e.value_ > p_ / 2) return -static_cast<i128>(p_ - e.value_);
  return static_cast<i128>(e.value_);
}

FieldElement Field::add(FieldElement a, FieldElement b) const {
  // Both operands are below 2^127, so the sum cannot overflow.
  u128 s = a.value_ + b.value_;
  if (s >= p_) s -= p_;
  return FieldElement(s);
}

FieldElement Field::sub(FieldElement a, FieldElement b) const {
  return FieldElement(a.value_ >= b.value_ ? a.value_ - b.value_
                                           : a.value_ + (p_ - b.value_));
}

FieldElement Field::neg(FieldElement a) const {
  return FieldElement(a.value_ == 0 ? 0 : p_ - a.value_);
}

FieldElement Field::mul(FieldElement a, FieldElement b) const {
  switch (reduction_) {
    case Reduction::kMersenne127: {
      u128 hi, lo;
      mul_wide(a.value_, b.value_, hi, lo);
      return FieldElement(reduce127(hi, lo));
    }
    case Reduction::kMersenne61:
      return FieldElement(reduce61(a.value_ * b.value_));
    case Reduction::kGeneric64:
      break;
  }
  return FieldElement(a.value_ * b.value_ % p_);
}

FieldElement Field::pow(FieldElement a, u128 exponent) const {
  FieldElement r = one();
  while (exponent) {
    if (exponent & 1) r = mul(r, a);
    a = mul(a, a);
    exponent >>= 1;
  }
  return r;
}

FieldElement Field::inv(FieldElement a) const {
  if (a.is_zero()) throw MalformedInput("inverse of zero");
  return pow(a, p_ - 2);
}

void Field::batch_inv(std::span<FieldElement> values) const {
  if (values.empty()) return;
  std::vector<FieldElement> prefix(values.size());
  FieldElement acc = one();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].is_zero()) throw MalformedInput("inverse of zero");
    prefix[i] = acc;
    acc = mul(acc, values[i]);
  }
  FieldElement inv_acc = inv(acc);
  for (std::size_t i = values.size(); i-- > 0;) {
    const FieldElement original = values[i];
    values[i] = mul(inv_acc, prefix[i]);
    inv_acc = mul(inv_acc, original);
  }
}

std::optional<FieldElement> Field::sqrt(FieldElement a) const {
  if (a.is_zero()) return zero();
  if (p_ == 2) return a;
  // Euler's criterion.
  if (pow(a, (p_ - 1) / 2) != one()) return std::nullopt;
  FieldElement root;
  if ((p_ & 3) == 3) {
    root = pow(a, (p_ + 1) / 4);
  } else {
    // Tonelli-Shanks.
    u128 q = p_ - 1;
    int s = 0;
    while ((q & 1) == 0) {
      q >>= 1;
      ++s;
    }
    FieldElement z = element(2);
    while (pow(z, (p_ - 1) / 2) == one()) z = add(z, one());
    FieldElement c = pow(z, q);
    FieldElement t = pow(a, q);
    root = pow(a, (q + 1) / 2);
    int m = s;
    while (t != one()) {
      int i = 0;
      FieldElement t2 = t;
      while (t2 != one()) {
        t2 = mul(t2, t2);
        ++i;
      }
      FieldElement b = c;
      for (int j = 0; j < m - i - 1; ++j) b = mul(b, b);
      root = mul(root, b);
      c = mul(b, b);
      t = mul(t, c);
      m = i;
    }
  }
  const FieldElement other = neg(root);
  return other.value_ < root.value_ ? other : root;
}

FieldElement Field::pow2(int k) const {
  if (k < 0) throw RangeError("negative power of two");
  if (k < 127) return element(u128{1} << k);
  return pow(element(2), static_cast<u128>(k));
}

void Field::append_words(FieldElement e, std::vector<std::uint64_t>& out) const {
  out.push_back(static_cast<std::uint64_t>(e.value_));
  if (words() == 2) out.push_back(static_cast<std::uint64_t>(e.value_ >> 64));
}

FieldElement Field::read_words(std::span<const std::uint64_t> words_in,
                               std::size_t offset) const {
  const std::size_t w = words();
  if (offset + w > words_in.size()) {
    throw MalformedInput("field element truncated at word " + std::to_string(offset));
  }
  u128 v = words_in[offset];
  if (w == 2) v |= static_cast<u128>(words_in[offset + 1]) << 64;
  if (v >= p_) {
    throw MalformedInput("non-canonical field element at word " +
                         std::to_string(offset));
  }
  return FieldElement(v);
}

std::vector<std::uint64_t> Field::to_words(std::span<const FieldElement> values) const {
  std::vector<std::uint64_t> out;
  out.reserve(values.size() * words());
  for (const FieldElement& v : values) append_words(v, out);
  return out;
}

std::vector<FieldElement> Field::from_words(std::span<const std::uint64_t> words_in) const {
  const std::size_t w = words();
  if (words_in.size() % w != 0) {
    throw MalformedInput("word count " + std::to_string(words_in.size()) +
                         " is not a multiple of the element width");
  }
  std::vector<FieldElement> out;
  out.reserve(words_in.size() / w);
  for (std::size_t i = 0; i < words_in.size(); i += w) out.push_back(read_words(words_in, i));
  return out;
}

std::string to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

}  // namespace falldet
