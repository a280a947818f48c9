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

#include "falldet/classifiers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "falldet/digest.hpp"
#include "falldet/error.hpp"

namespace falldet::classifiers {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "lr") return ModelKind::kLogisticRegression;
  if (name == "svm") return ModelKind::kSvm;
  if (name == "nb") return ModelKind::kNaiveBayes;
  throw ConfigError("unknown classifier '" + std::string(name) + "' (lr|svm|nb)");
}

namespace {

using nlohmann::json;
using mpc::Engine;
using mpc::Secret;

ModelKind parse_kind(const json& v) {
  if (!v.is_string()) throw LoadError("kind: expected a string");
  const auto s = v.get<std::string>();
  try {
    return parse_model_kind(s);
  } catch (const ConfigError&) {
    throw LoadError("kind: unknown model kind '" + s + "'");
  }
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) throw LoadError(path + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw LoadError(path + ": not finite");
  return d;
}

std::vector<double> vector_at(const json& v, const std::string& path, std::size_t dim) {
  if (!v.is_array()) throw LoadError(path + ": expected an array");
  if (v.size() != dim) {
    throw LoadError(path + ": has " + std::to_string(v.size()) + " entries, dimension is " +
                    std::to_string(dim));
  }
  std::vector<double> out;
  for (std::size_t j = 0; j < v.size(); ++j) {
    out.push_back(number_at(v[j], path + "[" + std::to_string(j) + "]"));
  }
  return out;
}

const json& field_at(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end() || it->is_null()) throw LoadError(std::string(name) + ": missing");
  return *it;
}

void check_encodable(double v, const FixedPointCodec& codec, const std::string& path) {
  if (std::fabs(v) >= std::ldexp(1.0, codec.int_bits())) {
    throw LoadError(path + ": value " + std::to_string(v) + " outside the fixed-point range");
  }
}

std::vector<FieldElement> encode_all(const FixedPointCodec& codec, std::span<const double> v,
                                     int scale) {
  std::vector<FieldElement> out;
  out.reserve(v.size());
  for (double d : v) out.push_back(codec.encode_scaled(d, scale));
  return out;
}

// Widest comparison bound the field's headroom allows.
int widest_comparison(const Engine& engine) {
  int log_n = 0;
  while ((std::size_t{1} << log_n) < engine.options().policy.parties) ++log_n;
  return engine.field().bits() - engine.options().kappa - log_n - 4;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogisticRegression:
      return "lr";
    case ModelKind::kSvm:
      return "svm";
    case ModelKind::kNaiveBayes:
      return "nb";
  }
  return "?";
}

ModelParams load_model(const json& doc, std::size_t window_size) {
  if (!doc.is_object()) throw LoadError("$: expected a JSON object");
  ModelParams m;
  m.kind = parse_kind(field_at(doc, "kind"));
  const json& fk = field_at(doc, "feature_kind");
  if (!fk.is_string()) throw LoadError("feature_kind: expected a string");
  try {
    m.feature_kind = features::parse_feature_kind(fk.get<std::string>());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("feature_kind: ") + e.what());
  }
  const json& dim = field_at(doc, "dimension");
  if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
    throw LoadError("dimension: expected a positive integer");
  }
  m.dimension = dim.get<std::size_t>();
  const std::size_t expected = features::feature_dimension(m.feature_kind, window_size);
  if (m.dimension != expected) {
    throw LoadError("dimension: " + std::to_string(m.dimension) + " does not match " +
                    std::string(features::to_string(m.feature_kind)) + " features (" +
                    std::to_string(expected) + ")");
  }
  if (auto it = doc.find("frac_bits"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<int>() <= 0) {
      throw LoadError("frac_bits: expected a positive integer");
    }
    m.frac_bits = it->get<int>();
  }
  if (m.is_linear()) {
    m.weights = vector_at(field_at(doc, "weights"), "weights", m.dimension);
    m.bias = number_at(field_at(doc, "bias"), "bias");
    return m;
  }
  const json& means = field_at(doc, "means");
  const json& variances = field_at(doc, "variances");
  const json& priors = field_at(doc, "log_priors");
  if (!means.is_array() || means.size() != 2) throw LoadError("means: expected two rows");
  if (!variances.is_array() || variances.size() != 2) {
    throw LoadError("variances: expected two rows");
  }
  for (int c = 0; c < 2; ++c) {
    const std::string row = "[" + std::to_string(c) + "]";
    m.means[c] = vector_at(means[c], "means" + row, m.dimension);
    m.variances[c] = vector_at(variances[c], "variances" + row, m.dimension);
    for (std::size_t j = 0; j < m.dimension; ++j) {
      if (m.variances[c][j] <= 0) {
        throw LoadError("variances" + row + "[" + std::to_string(j) +
                        "]: variance must be positive");
      }
    }
  }
  const auto lp = vector_at(priors, "log_priors", 2);
  m.log_priors = {lp[0], lp[1]};
  return m;
}

ModelParams load_model(const json& doc, const FixedPointCodec& codec, std::size_t window_size) {
  ModelParams m = load_model(doc, window_size);
  if (m.frac_bits != codec.frac_bits()) {
    throw LoadError("frac_bits: model uses " + std::to_string(m.frac_bits) +
                    ", runtime codec uses " + std::to_string(codec.frac_bits()));
  }
  const int f = codec.frac_bits();
  if (m.is_linear()) {
    for (std::size_t j = 0; j < m.dimension; ++j) {
      check_encodable(m.weights[j], codec, "weights[" + std::to_string(j) + "]");
    }
    check_encodable(m.bias, codec, "bias");
    return m;
  }
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < m.dimension; ++j) {
      const std::string idx = "[" + std::to_string(c) + "][" + std::to_string(j) + "]";
      check_encodable(m.means[c][j], codec, "means" + idx);
      check_encodable(1.0 / (2 * m.variances[c][j]), codec, "variances" + idx);
    }
  }
  check_encodable(m.log_priors[1] - m.log_priors[0], codec, "log_priors");
  return m;
}

ModelParams load_model_file(const std::string& path, const FixedPointCodec& codec,
                            std::size_t window_size) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open model file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(path + ": " + e.what());
  }
  return load_model(doc, codec, window_size);
}

json to_json(const ModelParams& m) {
  json doc;
  doc["kind"] = std::string(to_string(m.kind));
  doc["feature_kind"] = std::string(features::to_string(m.feature_kind));
  doc["dimension"] = m.dimension;
  doc["frac_bits"] = m.frac_bits;
  if (m.is_linear()) {
    doc["weights"] = m.weights;
    doc["bias"] = m.bias;
    doc["means"] = nullptr;
    doc["variances"] = nullptr;
    doc["log_priors"] = nullptr;
  } else {
    doc["weights"] = nullptr;
    doc["bias"] = nullptr;
    doc["means"] = json::array({m.means[0], m.means[1]});
    doc["variances"] = json::array({m.variances[0], m.variances[1]});
    doc["log_priors"] = json::array({m.log_priors[0], m.log_priors[1]});
  }
  return doc;
}

std::string model_digest(const ModelParams& model) { return sha256_hex(to_json(model).dump()); }

Secret decision_bit(Engine& engine, std::span<const Secret> x, const ModelParams& model,
                    const InferenceOptions& options) {
  if (x.size() != model.dimension) {
    throw MalformedInput("feature vector has " + std::to_string(x.size()) +
                         " entries, model expects " + std::to_string(model.dimension));
  }
  const FixedPointCodec& codec = engine.codec();
  const int f = codec.frac_bits();
  for (const Secret& s : x) {
    if (s.scale != f) throw ProtocolError("classifier input must carry frac_bits scale");
  }

  if (model.is_linear()) {
    const auto w = encode_all(codec, model.weights, f);
    Secret s;
    if (options.weights == WeightMode::kPublic) {
      s = engine.dot_public(x, w, f);
    } else {
      std::vector<Secret> shared;
      for (FieldElement e : w) shared.push_back(engine.constant(e, f));
      s = engine.inner_product(x, shared);
    }
    s = engine.add_public(s, codec.encode_scaled(model.bias, 2 * f));
    const Secret zero = engine.constant(engine.field().zero(), 2 * f);
    return engine.greater_equal(s, zero, codec.int_bits() + 2 * f);
  }

  // g1 - g0 = sum_j (x_j - mu0_j)^2 / (2 var0_j) - (x_j - mu1_j)^2 / (2 var1_j)
  //           + ln P1 - ln P0
  const std::size_t n = model.dimension;
  std::vector<Secret> d;
  std::vector<FieldElement> coef;
  d.reserve(2 * n);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < n; ++j) {
      d.push_back(engine.add_public(x[j], codec.encode_scaled(-model.means[c][j], f)));
      const double k = 1.0 / (2 * model.variances[c][j]);
      coef.push_back(codec.encode_scaled(c == 0 ? k : -k, 2 * f));
    }
  }
  auto sq = engine.trunc(engine.mul(d, d), f);
  Secret g = engine.dot_public(sq, coef, 2 * f);
  g = engine.add_public(g, codec.encode_scaled(model.log_priors[1] - model.log_priors[0], 3 * f));
  const Secret zero = engine.constant(engine.field().zero(), 3 * f);
  return engine.greater_equal(g, zero, widest_comparison(engine));
}

int infer(Engine& engine, std::span<const Secret> x, const ModelParams& model,
          const InferenceOptions& options) {
  const Secret bit = decision_bit(engine, x, model, options);
  engine.mark_output(bit);
  const FieldElement label = engine.open(bit);
  if (label != engine.field().zero() && label != engine.field().one()) {
    throw ProtocolError("opened label is not a bit");
  }
  return label.is_zero() ? 0 : 1;
}

double oracle_margin(std::span<const double> x, const ModelParams& model) {
  if (x.size() != model.dimension) {
    throw MalformedInput("feature vector has " + std::to_string(x.size()) +
                         " entries, model expects " + std::to_string(model.dimension));
  }
  if (model.is_linear()) {
    double s = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j) s += model.weights[j] * x[j];
    return s;
  }
  double g = model.log_priors[1] - model.log_priors[0];
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d0 = x[j] - model.means[0][j];
    const double d1 = x[j] - model.means[1][j];
    g += d0 * d0 / (2 * model.variances[0][j]) - d1 * d1 / (2 * model.variances[1][j]);
  }
  return g;
}

int oracle_infer(std::span<const double> x, const ModelParams& model) {
  return oracle_margin(x, model) >= 0 ? 1 : 0;
}

}  // namespace falldet::classifiers
