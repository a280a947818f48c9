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

#include "falldet/shamir.hpp"

#include <algorithm>
#include <string>

#include "falldet/error.hpp"

namespace falldet::shamir {
namespace {

void check_distinct(std::span<const PartyIndex> indices) {
  std::vector<PartyIndex> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw MalformedInput("duplicate party index in share set");
  }
  if (!sorted.empty() && sorted.front() == 0) {
    throw MalformedInput("party index 0 is reserved for the secret");
  }
}

// Evaluates the polynomial through (x_i, y_i) at point x.
FieldElement interpolate_at(const Field& field, std::span<const Share> points,
                            FieldElement x) {
  FieldElement acc = field.zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const FieldElement xi = field.element(points[i].party);
    FieldElement num = field.one();
    FieldElement den = field.one();
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      const FieldElement xj = field.element(points[j].party);
      num = field.mul(num, field.sub(x, xj));
      den = field.mul(den, field.sub(xi, xj));
    }
    acc = field.add(acc, field.mul(points[i].value, field.mul(num, field.inv(den))));
  }
  return acc;
}

}  // namespace

void SharingPolicy::validate() const {
  if (degree < 1) throw ConfigError("sharing degree must be at least 1");
  if (2 * degree + 1 > parties) {
    throw ConfigError("sharing policy needs 2*degree+1 <= parties (degree " +
                      std::to_string(degree) + ", parties " + std::to_string(parties) +
                      ")");
  }
}

void share_values(const Field& field, FieldElement secret, const SharingPolicy& policy,
                  RandomSource& rng, std::span<FieldElement> out) {
  if (out.size() != policy.parties) throw MalformedInput("share output size mismatch");
  // Coefficients a_1..a_d; Horner evaluation at x = 1..n.
  FieldElement coeffs[8];
  std::vector<FieldElement> heap;
  FieldElement* a = coeffs;
  if (policy.degree > 8) {
    heap.resize(policy.degree);
    a = heap.data();
  }
  for (std::size_t k = 0; k < policy.degree; ++k) a[k] = rng.uniform(field);
  if (policy.degree == 1) {
    // f(i + 1) = f(i) + a_1.
    FieldElement acc = secret;
    for (std::size_t i = 0; i < policy.parties; ++i) {
      acc = field.add(acc, a[0]);
      out[i] = acc;
    }
    return;
  }
  for (std::size_t i = 0; i < policy.parties; ++i) {
    const FieldElement x = field.element(i + 1);
    FieldElement acc = a[policy.degree - 1];
    for (std::size_t k = policy.degree - 1; k-- > 0;) acc = field.add(field.mul(acc, x), a[k]);
    out[i] = field.add(field.mul(acc, x), secret);
  }
}

std::vector<Share> share(const Field& field, FieldElement secret,
                         const SharingPolicy& policy, RandomSource& rng) {
  policy.validate();
  std::vector<FieldElement> values(policy.parties);
  share_values(field, secret, policy, rng, values);
  std::vector<Share> out;
  out.reserve(policy.parties);
  for (std::size_t i = 0; i < policy.parties; ++i) {
    out.push_back(Share{static_cast<PartyIndex>(i + 1), values[i]});
  }
  return out;
}

FieldElement reconstruct(const Field& field, std::span<const Share> shares,
                         const SharingPolicy& policy) {
  if (shares.size() < policy.reconstruct_count()) {
    throw InsufficientShares("reconstruction needs " +
                             std::to_string(policy.reconstruct_count()) + " shares, got " +
                             std::to_string(shares.size()));
  }
  std::vector<PartyIndex> indices;
  indices.reserve(shares.size());
  for (const Share& s : shares) indices.push_back(s.party);
  check_distinct(indices);
  const auto used = shares.first(policy.reconstruct_count());
  std::vector<PartyIndex> used_idx(indices.begin(),
                                   indices.begin() + static_cast<long>(used.size()));
  const auto weights = lagrange_weights(field, used_idx);
  FieldElement acc = field.zero();
  for (std::size_t i = 0; i < used.size(); ++i) {
    acc = field.add(acc, field.mul(weights[i], used[i].value));
  }
  return acc;
}

bool consistent(const Field& field, std::span<const Share> shares,
                const SharingPolicy& policy) {
  if (shares.size() <= policy.reconstruct_count()) return true;
  const auto base = shares.first(policy.reconstruct_count());
  for (std::size_t i = base.size(); i < shares.size(); ++i) {
    if (interpolate_at(field, base, field.element(shares[i].party)) != shares[i].value) {
      return false;
    }
  }
  return true;
}

std::vector<FieldElement> lagrange_weights(const Field& field,
                                           std::span<const PartyIndex> indices) {
  check_distinct(indices);
  std::vector<FieldElement> weights;
  weights.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    FieldElement num = field.one();
    FieldElement den = field.one();
    const FieldElement xi = field.element(indices[i]);
    for (std::size_t l = 0; l < indices.size(); ++l) {
      if (l == i) continue;
      const FieldElement xl = field.element(indices[l]);
      // prod (-x_l) / (x_i - x_l)
      num = field.mul(num, field.neg(xl));
      den = field.mul(den, field.sub(xi, xl));
    }
    weights.push_back(field.mul(num, field.inv(den)));
  }
  return weights;
}

}  // namespace falldet::shamir
