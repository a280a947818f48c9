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

#ifndef FALLDET_SHAMIR_HPP_
#define FALLDET_SHAMIR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "falldet/field.hpp"
#include "falldet/random.hpp"

namespace falldet::shamir {

using PartyIndex = std::uint32_t;

// A point (i, f(i)) on a secret polynomial. Party indices start at 1.
struct Share {
  PartyIndex party = 0;
  FieldElement value;

  friend bool operator==(const Share&, const Share&) = default;
};

// n parties, polynomial degree d; any d+1 shares reconstruct. 2d+1 <= n is
// required so products of two sharings can be re-shared.
struct SharingPolicy {
  std::size_t parties = 3;
  std::size_t degree = 1;

  std::size_t reconstruct_count() const { return degree + 1; }
  // Throws ConfigError when degree < 1 or 2*degree + 1 > parties.
  void validate() const;
};

// Shares `secret` as evaluations f(1..n) of a degree-d polynomial with
// f(0) = secret and coefficients drawn from `rng`.
std::vector<Share> share(const Field& field, FieldElement secret,
                         const SharingPolicy& policy, RandomSource& rng);

// Same as share() but writes only the share values, indexed by party - 1.
void share_values(const Field& field, FieldElement secret,
                  const SharingPolicy& policy, RandomSource& rng,
                  std::span<FieldElement> out);

// f(0) of the degree-d polynomial through the given shares. Uses the first
// d+1 shares; throws InsufficientShares or MalformedInput (duplicate index).
FieldElement reconstruct(const Field& field, std::span<const Share> shares,
                         const SharingPolicy& policy);

// True when every share lies on the polynomial interpolated from the first
// d+1 of them.
bool consistent(const Field& field, std::span<const Share> shares,
                const SharingPolicy& policy);

// Lagrange coefficients for evaluating at 0: sum_i w_i * f(x_i) = f(0) for
// every polynomial of degree < indices.size().
std::vector<FieldElement> lagrange_weights(const Field& field,
                                           std::span<const PartyIndex> indices);

}  // namespace falldet::shamir

#endif  // FALLDET_SHAMIR_HPP_
