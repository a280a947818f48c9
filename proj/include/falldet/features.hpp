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

#ifndef FALLDET_FEATURES_HPP_
#define FALLDET_FEATURES_HPP_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "falldet/mpc/engine.hpp"

namespace falldet::features {

inline constexpr std::size_t kDefaultWindowSize = 24;
inline constexpr double kDefaultRateHz = 31.25;

enum class FeatureKind { kSmartfall, kDerivative };

std::string_view to_string(FeatureKind kind);
// Throws ConfigError for anything but "smartfall" or "derivative".
FeatureKind parse_feature_kind(std::string_view name);

// Feature vector length for a window of `window_size` samples.
std::size_t feature_dimension(FeatureKind kind, std::size_t window_size = kDefaultWindowSize);

// One tri-axial accelerometer reading in g.
struct Sample {
  double x = 0;
  double y = 0;
  double z = 0;
};

struct Window {
  std::vector<Sample> samples;
  double rate_hz = kDefaultRateHz;
};

// A reading whose components are shared fixed-point values.
struct SharedSample {
  mpc::Secret x;
  mpc::Secret y;
  mpc::Secret z;
};

// sqrt(x^2 + y^2 + z^2) per sample: one inner-product round, a truncation
// and the square-root schedule, all batched over the window.
std::vector<mpc::Secret> magnitudes(mpc::Engine& engine, std::span<const SharedSample> w);

// max - min over the whole vector.
mpc::Secret delta_s(mpc::Engine& engine, std::span<const mpc::Secret> magnitudes);

// The window's magnitudes followed by delta_s.
std::vector<mpc::Secret> smartfall_features(mpc::Engine& engine,
                                            std::span<const SharedSample> w,
                                            std::size_t window_size = kDefaultWindowSize);

// (sum dx, sum dy, sum dz, sum dx^2, sum dy^2, sum dz^2) where d is the
// central difference (a[i+1] - a[i-1]) / 2 over the valid interior.
std::vector<mpc::Secret> derivative_features(mpc::Engine& engine,
                                             std::span<const SharedSample> w);

std::vector<mpc::Secret> extract(mpc::Engine& engine, FeatureKind kind,
                                 std::span<const SharedSample> w,
                                 std::size_t window_size = kDefaultWindowSize);

// Floating-point reference with the same windowing and boundary handling.
std::vector<double> oracle_features(const Window& w, FeatureKind kind,
                                    std::size_t window_size = kDefaultWindowSize);

}  // namespace falldet::features

#endif  // FALLDET_FEATURES_HPP_
