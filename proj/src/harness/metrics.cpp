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


#include "falldet/harness/metrics.hpp"

#include <cstdio>

namespace falldet::harness {

void Confusion::add(int predicted, int actual) {
  if (predicted == 1) {
    ++(actual == 1 ? tp : fp);
  } else {
    ++(actual == 1 ? fn : tn);
  }
}

Metrics metrics_from(const Confusion& c) {
  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0;
  return m;
}

std::string format_metrics(const Metrics& m) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "accuracy=%.3f precision=%.3f recall=%.3f f1=%.3f", m.accuracy,
                m.precision, m.recall, m.f1);
  return buf;
}

}  // namespace falldet::harness
