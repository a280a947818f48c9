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

#include "falldet/fixed_point.hpp"

#include <cmath>
#include <sstream>

#include "falldet/error.hpp"

namespace falldet {

FixedPointCodec::FixedPointCodec(Field field, int frac_bits, int int_bits)
    : field_(std::move(field)), frac_bits_(frac_bits), int_bits_(int_bits) {
  if (frac_bits < 0 || int_bits < 1) {
    throw ConfigError("fixed-point bit counts must be positive");
  }
  if (frac_bits + int_bits + 1 >= field_.bits()) {
    throw ConfigError("fixed-point range of " + std::to_string(frac_bits + int_bits) +
                      " bits does not fit a " + std::to_string(field_.bits()) +
                      "-bit field");
  }
}

bool FixedPointCodec::has_headroom(int kappa) const {
  // 2^(2(f+m)+kappa) < P  <=>  2(f+m)+kappa < bits(P) for P not a power of two.
  return 2 * value_bits() + kappa < field_.bits();
}

FieldElement FixedPointCodec::encode(double x) const {
  if (!std::isfinite(x) || std::fabs(x) >= std::ldexp(1.0, int_bits_)) {
    std::ostringstream msg;
    msg << "value " << x << " outside fixed-point range |x| < 2^" << int_bits_;
    throw RangeError(msg.str());
  }
  return encode_scaled(x, frac_bits_);
}

double FixedPointCodec::decode(FieldElement e) const { return decode_scaled(e, frac_bits_); }

FieldElement FixedPointCodec::encode_scaled(double x, int scale) const {
  if (!std::isfinite(x)) throw RangeError("non-finite value cannot be encoded");
  const long double scaled = std::round(std::ldexp(static_cast<long double>(x), scale));
  if (std::fabs(scaled) >= std::ldexp(1.0L, field_.bits() - 2)) {
    throw RangeError("scaled value exceeds field capacity");
  }
  return field_.from_signed(static_cast<i128>(scaled));
}

double FixedPointCodec::decode_scaled(FieldElement e, int scale) const {
  const i128 v = field_.to_signed(e);
  return static_cast<double>(std::ldexp(static_cast<long double>(v), -scale));
}

double FixedPointCodec::ulp() const { return std::ldexp(1.0, -frac_bits_); }

}  // namespace falldet
