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

#ifndef FALLDET_CLASSIFIERS_HPP_
#define FALLDET_CLASSIFIERS_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "falldet/features.hpp"
#include "falldet/mpc/engine.hpp"

namespace falldet::classifiers {

enum class ModelKind { kLogisticRegression, kSvm, kNaiveBayes };

std::string_view to_string(ModelKind kind);
// "lr", "svm" or "nb"; throws ConfigError otherwise.
ModelKind parse_model_kind(std::string_view name);

// Public model parameters. Naive Bayes rows are indexed by class (0 = no
// fall, 1 = fall).
struct ModelParams {
  ModelKind kind = ModelKind::kSvm;
  features::FeatureKind feature_kind = features::FeatureKind::kDerivative;
  std::size_t dimension = 0;
  std::vector<double> weights;
  double bias = 0;
  std::array<std::vector<double>, 2> means;
  std::array<std::vector<double>, 2> variances;
  std::array<double, 2> log_priors{};
  int frac_bits = FixedPointCodec::kDefaultFracBits;

  bool is_linear() const { return kind != ModelKind::kNaiveBayes; }
};

// Parses and validates a model document. Every failure is a LoadError whose
// message starts with the offending field path, e.g. "variances[1][3]".
// With a codec, every value must also be encodable and frac_bits must agree.
ModelParams load_model(const nlohmann::json& doc, std::size_t window_size =
                                                      features::kDefaultWindowSize);
ModelParams load_model(const nlohmann::json& doc, const FixedPointCodec& codec,
                       std::size_t window_size = features::kDefaultWindowSize);
ModelParams load_model_file(const std::string& path, const FixedPointCodec& codec,
                            std::size_t window_size = features::kDefaultWindowSize);

nlohmann::json to_json(const ModelParams& model);
// SHA-256 of the canonical JSON form; parties compare it before a session.
std::string model_digest(const ModelParams& model);

enum class WeightMode {
  kPublic,  // weights as public multipliers, no communication
  kShared,  // weights as degree-0 shares, one inner-product round
};

struct InferenceOptions {
  WeightMode weights = WeightMode::kPublic;
};

// Shared decision bit; 1 means fall. Ties at exactly zero give 1.
mpc::Secret decision_bit(mpc::Engine& engine, std::span<const mpc::Secret> x,
                         const ModelParams& model, const InferenceOptions& options = {});

// decision_bit, marked as the session output and opened.
int infer(mpc::Engine& engine, std::span<const mpc::Secret> x, const ModelParams& model,
          const InferenceOptions& options = {});

// Decision value in floating point: theta.x + b for linear models, g1 - g0
// for naive Bayes.
double oracle_margin(std::span<const double> x, const ModelParams& model);
int oracle_infer(std::span<const double> x, const ModelParams& model);

}  // namespace falldet::classifiers

#endif  // FALLDET_CLASSIFIERS_HPP_
