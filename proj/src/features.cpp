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

#include "falldet/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falldet/error.hpp"

namespace falldet::features {

using mpc::Engine;
using mpc::Secret;

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kSmartfall ? "smartfall" : "derivative";
}

FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "smartfall") return FeatureKind::kSmartfall;
  if (name == "derivative") return FeatureKind::kDerivative;
  throw ConfigError("unknown feature kind '" + std::string(name) + "'");
}

std::size_t feature_dimension(FeatureKind kind, std::size_t window_size) {
  return kind == FeatureKind::kSmartfall ? window_size + 1 : 6;
}

std::vector<Secret> magnitudes(Engine& engine, std::span<const SharedSample> w) {
  if (w.empty()) return {};
  std::vector<std::vector<Secret>> v;
  v.reserve(w.size());
  for (const SharedSample& s : w) v.push_back({s.x, s.y, s.z});
  auto squares = engine.inner_products(v, v);
  auto scaled = engine.trunc(squares, engine.codec().frac_bits());
  return engine.secure_sqrt(scaled);
}

Secret delta_s(Engine& engine, std::span<const Secret> magnitudes) {
  if (magnitudes.empty()) throw MalformedInput("delta_s: empty window");
  auto [lo, hi] = engine.window_min_max(magnitudes);
  return engine.sub(hi, lo);
}

std::vector<Secret> smartfall_features(Engine& engine, std::span<const SharedSample> w,
                                       std::size_t window_size) {
  if (w.size() != window_size) {
    throw MalformedInput("smartfall window has " + std::to_string(w.size()) +
                         " samples, expected " + std::to_string(window_size));
  }
  auto out = magnitudes(engine, w);
  out.push_back(delta_s(engine, out));
  return out;
}

std::vector<Secret> derivative_features(Engine& engine, std::span<const SharedSample> w) {
  if (w.size() < 3) {
    throw MalformedInput("derivative window needs at least 3 samples, got " +
                         std::to_string(w.size()));
  }
  const int f = engine.codec().frac_bits();
  const FieldElement one = engine.field().one();
  // Convolution with the public kernel is local. Multiplying by one at scale
  // 1 is an exact halving: the share is unchanged and the scale grows.
  std::vector<std::vector<Secret>> d(3);
  for (std::size_t i = 1; i + 1 < w.size(); ++i) {
    d[0].push_back(engine.mul_public(engine.sub(w[i + 1].x, w[i - 1].x), one, 1));
    d[1].push_back(engine.mul_public(engine.sub(w[i + 1].y, w[i - 1].y), one, 1));
    d[2].push_back(engine.mul_public(engine.sub(w[i + 1].z, w[i - 1].z), one, 1));
  }
  std::vector<Secret> pending;
  for (const auto& channel : d) {
    Secret sum = channel.front();
    for (std::size_t i = 1; i < channel.size(); ++i) sum = engine.add(sum, channel[i]);
    pending.push_back(sum);
  }
  auto squares = engine.inner_products(d, d);
  pending.insert(pending.end(), squares.begin(), squares.end());
  // Back to scale f in a single batched truncation: 1 bit for the sums,
  // f + 2 bits for the squares.
  std::vector<int> ks;
  for (const Secret& s : pending) ks.push_back(s.scale - f);
  return engine.trunc(pending, ks);
}

std::vector<Secret> extract(Engine& engine, FeatureKind kind, std::span<const SharedSample> w,
                            std::size_t window_size) {
  if (kind == FeatureKind::kSmartfall) return smartfall_features(engine, w, window_size);
  if (w.size() != window_size) {
    throw MalformedInput("derivative window has " + std::to_string(w.size()) +
                         " samples, expected " + std::to_string(window_size));
  }
  return derivative_features(engine, w);
}

std::vector<double> oracle_features(const Window& w, FeatureKind kind, std::size_t window_size) {
  const auto& s = w.samples;
  if (kind == FeatureKind::kSmartfall) {
    if (s.size() != window_size) {
      throw MalformedInput("smartfall window has " + std::to_string(s.size()) +
                           " samples, expected " + std::to_string(window_size));
    }
    std::vector<double> out;
    for (const Sample& v : s) out.push_back(std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z));
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    out.push_back(*hi - *lo);
    return out;
  }
  if (s.size() < 3) {
    throw MalformedInput("derivative window needs at least 3 samples, got " +
                         std::to_string(s.size()));
  }
  std::vector<double> out(6, 0.0);
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double dx = (s[i + 1].x - s[i - 1].x) / 2;
    const double dy = (s[i + 1].y - s[i - 1].y) / 2;
    const double dz = (s[i + 1].z - s[i - 1].z) / 2;
    out[0] += dx;
    out[1] += dy;
    out[2] += dz;
    out[3] += dx * dx;
    out[4] += dy * dy;
    out[5] += dz * dz;
  }
  return out;
}

}  // namespace falldet::features
