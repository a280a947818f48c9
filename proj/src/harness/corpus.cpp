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


#include "falldet/harness/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "falldet/error.hpp"

namespace falldet::harness {

namespace {

struct Vec {
  double x = 0, y = 0, z = 0;
  Vec operator+(Vec o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec operator*(double k) const { return {x * k, y * k, z * k}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec unit() const { return *this * (1.0 / norm()); }
};

class Generator {
 public:
  Generator(const CorpusOptions& o) : o_(o), gen_(o.seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double normal(double sigma) { return std::normal_distribution<double>(0, sigma)(gen_); }
  Vec noise(double sigma) { return {normal(sigma), normal(sigma), normal(sigma)}; }
  Vec direction() { return Vec{normal(1), normal(1), normal(1)}.unit(); }
  // Gravity as seen by a worn device: mostly along z with some tilt.
  Vec upright() { return Vec{normal(0.25), normal(0.25), 1.0}.unit(); }

  void window(std::vector<device::ImuRecord>& out, std::size_t index) {
    const std::size_t n = o_.window_len;
    std::vector<Vec> a(n);
    std::vector<int> label(n, 0);
    const Vec g = upright();
    if (uniform(0, 1) < o_.fall_fraction) {
      fall(a, label, g);
    } else {
      const double pick = uniform(0, 1);
      if (pick < 0.3) {
        for (auto& v : a) v = g + noise(0.02);
      } else if (pick < 0.7) {
        const double amp = uniform(0.15, 0.45), f = uniform(1.6, 2.2), phase = uniform(0, 6.3);
        for (std::size_t i = 0; i < n; ++i) {
          const double t = static_cast<double>(i) / o_.rate_hz;
          a[i] = g * (1 + amp * std::sin(2 * std::numbers::pi * f * t + phase)) + noise(0.05);
        }
      } else if (pick < 0.9) {
        const double centre = uniform(6, 16), depth = uniform(0.2, 0.45);
        for (std::size_t i = 0; i < n; ++i) {
          const double d = (static_cast<double>(i) - centre) / 3.0;
          const double bump = std::exp(-d * d) - 0.8 * std::exp(-(d - 1.5) * (d - 1.5));
          a[i] = g * (1 - depth * bump) + noise(0.03);
        }
      } else {
        // Jump: push off, short flight, landing.
        std::fill(a.begin(), a.end(), g);
        std::size_t i = static_cast<std::size_t>(integer(2, 8));
        for (int k = 0; k < 2 && i < n; ++k) a[i++] = g * uniform(1.4, 1.8);
        const double flight = uniform(0.3, 0.6);
        for (int k = integer(3, 5); k > 0 && i < n; --k) a[i++] = g * flight;
        for (int k = 0; k < 2 && i < n; ++k) a[i++] = g * uniform(1.8, 2.8);
        for (auto& v : a) v = v + noise(0.04);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      Vec v = a[i];
      v = {std::clamp(v.x, -8.0, 8.0), std::clamp(v.y, -8.0, 8.0), std::clamp(v.z, -8.0, 8.0)};
      if (v.norm() < 0.2) v = v.unit() * 0.2;
      const std::size_t k = index * n + i;
      out.push_back({static_cast<double>(k) / o_.rate_hz, v.x, v.y, v.z, label[i], k + 2});
    }
  }

 private:
  void fall(std::vector<Vec>& a, std::vector<int>& label, Vec g) {
    const std::size_t n = a.size();
    const bool soft = uniform(0, 1) < 0.25;
    std::size_t i = static_cast<std::size_t>(integer(2, 7));
    for (std::size_t k = 0; k < i; ++k) a[k] = g + noise(0.04);
    const double free_mag = soft ? uniform(0.5, 0.8) : uniform(0.2, 0.5);
    for (int k = soft ? integer(2, 4) : integer(4, 7); k > 0 && i < n; --k, ++i) {
      a[i] = g * free_mag + noise(0.03);
      label[i] = 1;
    }
    const Vec hit = direction();
    for (int k = integer(1, 3); k > 0 && i < n; --k, ++i) {
      a[i] = hit * (soft ? uniform(1.8, 2.8) : uniform(3.0, 6.0)) + noise(0.1);
      label[i] = 1;
    }
    // Lying: gravity along a different body axis.
    const Vec rest = Vec{1.0 + normal(0.2), normal(0.3), normal(0.3)}.unit();
    for (; i < n; ++i) a[i] = rest + noise(0.03);
  }

  CorpusOptions o_;
  std::mt19937_64 gen_;
};

}  // namespace

std::vector<device::ImuRecord> synthetic_corpus(const CorpusOptions& options) {
  if (options.window_len < 3) throw ConfigError("window length must be at least 3");
  Generator g(options);
  std::vector<device::ImuRecord> out;
  out.reserve(options.windows * options.window_len);
  for (std::size_t w = 0; w < options.windows; ++w) g.window(out, w);
  return out;
}

std::vector<device::LabeledWindow> corpus_windows(const CorpusOptions& options) {
  const auto records = synthetic_corpus(options);
  return device::make_windows(records, options.window_len, options.window_len, options.rate_hz);
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

struct Standardized {
  std::vector<double> mean, scale;
  std::vector<std::vector<double>> z;
};

Standardized standardize(const std::vector<std::vector<double>>& x) {
  const std::size_t d = x.front().size();
  Standardized s{std::vector<double>(d, 0), std::vector<double>(d, 0), x};
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  for (auto& m : s.mean) m /= static_cast<double>(x.size());
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
  }
  for (auto& v : s.scale) v = std::max(std::sqrt(v / static_cast<double>(x.size())), 1e-6);
  for (auto& row : s.z) {
    for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - s.mean[j]) / s.scale[j];
  }
  return s;
}

}  // namespace

classifiers::ModelParams fit_model(classifiers::ModelKind kind, features::FeatureKind feature_kind,
                                   const std::vector<std::vector<double>>& x,
                                   const std::vector<int>& y, std::size_t window_len) {
  const std::size_t d = features::feature_dimension(feature_kind, window_len);
  if (x.empty() || x.size() != y.size()) throw ConfigError("fit_model: empty or ragged data");
  const auto n0 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 0));
  if (n0 == 0 || n0 == y.size()) throw ConfigError("fit_model: both classes are required");
  for (const auto& row : x) {
    if (row.size() != d) throw ConfigError("fit_model: feature row of the wrong length");
  }
  classifiers::ModelParams m;
  m.kind = kind;
  m.feature_kind = feature_kind;
  m.dimension = d;
  const double n = static_cast<double>(x.size());

  if (kind == classifiers::ModelKind::kNaiveBayes) {
    for (int c = 0; c < 2; ++c) {
      std::vector<double> mean(d, 0), var(d, 0);
      double count = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != c) continue;
        ++count;
        for (std::size_t j = 0; j < d; ++j) mean[j] += x[i][j];
      }
      for (auto& v : mean) v /= count;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] != c) continue;
        for (std::size_t j = 0; j < d; ++j) var[j] += (x[i][j] - mean[j]) * (x[i][j] - mean[j]);
      }
      for (std::size_t j = 0; j < d; ++j) {
        m.means[c].push_back(round6(mean[j]));
        m.variances[c].push_back(round6(std::max(var[j] / count, 1e-3)));
      }
      m.log_priors[c] = round6(std::log(count / n));
    }
    return m;
  }

  const Standardized s = standardize(x);
  std::vector<double> w(d, 0);
  double b = 0;
  const bool svm = kind == classifiers::ModelKind::kSvm;
  const double lambda = 1e-3;
  const int iterations = 3000;
  std::vector<double> w_avg(d, 0);
  double b_avg = 0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(d, 0);
    double grad_b = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double score = b;
      for (std::size_t j = 0; j < d; ++j) score += w[j] * s.z[i][j];
      double g;
      if (svm) {
        const double t = y[i] == 1 ? 1.0 : -1.0;
        g = t * score < 1 ? -t : 0.0;
      } else {
        g = 1.0 / (1.0 + std::exp(-score)) - y[i];
      }
      for (std::size_t j = 0; j < d; ++j) grad[j] += g * s.z[i][j];
      grad_b += g;
    }
    const double rate = svm ? 0.1 : 0.5;
    for (std::size_t j = 0; j < d; ++j) w[j] -= rate * (grad[j] / n + lambda * w[j]);
    b -= rate * grad_b / n;
    if (it >= iterations / 2) {
      for (std::size_t j = 0; j < d; ++j) w_avg[j] += w[j];
      b_avg += b;
    }
  }
  const double half = iterations - iterations / 2;
  double bias = b_avg / half;
  for (std::size_t j = 0; j < d; ++j) {
    const double wj = w_avg[j] / half / s.scale[j];
    m.weights.push_back(round6(wj));
    bias -= wj * s.mean[j];
  }
  m.bias = round6(bias);
  return m;
}

}  // namespace falldet::harness
