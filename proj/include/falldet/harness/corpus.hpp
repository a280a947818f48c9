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


#ifndef FALLDET_HARNESS_CORPUS_HPP_
#define FALLDET_HARNESS_CORPUS_HPP_

#include <cstdint>
#include <vector>

#include "falldet/classifiers.hpp"
#include "falldet/device/client.hpp"

namespace falldet::harness {

struct CorpusOptions {
  std::size_t windows = 1000;
  std::size_t window_len = features::kDefaultWindowSize;
  double rate_hz = features::kDefaultRateHz;
  double fall_fraction = 0.3;
  std::uint64_t seed = 2026;
};

// Seeded synthetic recording: window-aligned segments of daily activity
// (rest, walking, sitting down, jumps) and falls (free fall, impact, lying
// still). Records of a fall's free-fall and impact phases are labeled 1.
// Components stay within +-8 g and magnitudes at or above 0.2 g.
std::vector<device::ImuRecord> synthetic_corpus(const CorpusOptions& options = {});

// Windows of window_len with stride window_len, aligned with the segments.
std::vector<device::LabeledWindow> corpus_windows(const CorpusOptions& options = {});

// Reference model fitted to plaintext features: Gaussian naive Bayes by
// moments, logistic regression and a linear SVM by full-batch gradient
// descent on standardized features. Deterministic.
classifiers::ModelParams fit_model(classifiers::ModelKind kind, features::FeatureKind feature_kind,
                                   const std::vector<std::vector<double>>& x,
                                   const std::vector<int>& y,
                                   std::size_t window_len = features::kDefaultWindowSize);

}  // namespace falldet::harness

#endif  // FALLDET_HARNESS_CORPUS_HPP_
