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

#ifndef FALLDET_FIXED_POINT_HPP_
#define FALLDET_FIXED_POINT_HPP_

#include "falldet/field.hpp"

namespace falldet {

// Maps reals into the field as round(x * 2^frac_bits); negatives use the
// upper half of the field. Rounding is half-away-from-zero.
class FixedPointCodec {
 public:
  static constexpr int kDefaultFracBits = 16;
  static constexpr int kDefaultIntBits = 20;

  FixedPointCodec(Field field, int frac_bits = kDefaultFracBits,
                  int int_bits = kDefaultIntBits);

  const Field& field() const { return field_; }
  int frac_bits() const { return frac_bits_; }
  int int_bits() const { return int_bits_; }
  // Total magnitude bits of an encoded value, int_bits + frac_bits.
  int value_bits() const { return frac_bits_ + int_bits_; }

  // True when 2^(2 * value_bits) * 2^kappa < P, i.e. one product plus a
  // statistical mask of kappa bits never wraps the modulus.
  bool has_headroom(int kappa) const;

  // Throws RangeError unless |x| < 2^int_bits.
  FieldElement encode(double x) const;
  double decode(FieldElement e) const;

  // Encoding with an explicit number of fractional bits; used for public
  // constants that must carry more precision than the data.
  FieldElement encode_scaled(double x, int scale) const;
  double decode_scaled(FieldElement e, int scale) const;

  // One unit in the last place, 2^-frac_bits.
  double ulp() const;

 private:
  Field field_;
  int frac_bits_;
  int int_bits_;
};

}  // namespace falldet

#endif  // FALLDET_FIXED_POINT_HPP_
