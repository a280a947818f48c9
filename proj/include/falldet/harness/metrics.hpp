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


#ifndef FALLDET_HARNESS_METRICS_HPP_
#define FALLDET_HARNESS_METRICS_HPP_

#include <cstdint>
#include <string>

namespace falldet::harness {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  void add(int predicted, int actual);
  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

// Ratios are 0 when their denominator is 0.
struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

Metrics metrics_from(const Confusion& c);

// "accuracy precision recall f1" with three decimals.
std::string format_metrics(const Metrics& m);

}  // namespace falldet::harness

#endif  // FALLDET_HARNESS_METRICS_HPP_
