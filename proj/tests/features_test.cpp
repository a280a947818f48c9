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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "falldet/error.hpp"
#include "test_util.hpp"

namespace falldet::features {
namespace {

using falldet::testing::as_inputs;
using falldet::testing::deal_samples;
using falldet::testing::default_codec;
using falldet::testing::PartyIndex;
using falldet::testing::run_open;
using falldet::testing::run_parties;
using falldet::testing::RunOptions;
using mpc::Engine;
using mpc::Secret;

constexpr double kFeatureTolerance = 1.0 / 64;

RunOptions debug_options() {
  RunOptions o;
  o.engine.debug = true;
  return o;
}

Window window_of(std::vector<Sample> samples) { return Window{std::move(samples)}; }

Window constant_window(Sample s, std::size_t n = kDefaultWindowSize) {
  return window_of(std::vector<Sample>(n, s));
}

// Random readings in g, clamped to one axis' range.
Window random_window(std::mt19937_64& gen, std::size_t n = kDefaultWindowSize) {
  std::normal_distribution<double> noise(0.0, 0.8);
  std::uniform_real_distribution<double> spike(0.0, 1.0);
  Window w;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s{noise(gen), noise(gen), 1.0 + noise(gen)};
    if (spike(gen) < 0.1) s.x *= 6;
    s.x = std::clamp(s.x, -8.0, 8.0);
    s.y = std::clamp(s.y, -8.0, 8.0);
    s.z = std::clamp(s.z, -8.0, 8.0);
    w.samples.push_back(s);
  }
  return w;
}

class FeaturesTest : public ::testing::Test {
 protected:
  FixedPointCodec codec_ = default_codec();

  // Runs the MPC pipeline on each window and returns decoded features.
  std::vector<std::vector<double>> mpc_features(const std::vector<Window>& windows,
                                                FeatureKind kind,
                                                std::vector<mpc::RoundCounter>* counters =
                                                    nullptr) {
    std::vector<features::Sample> all;
    for (const Window& w : windows) all.insert(all.end(), w.samples.begin(), w.samples.end());
    auto dealt = deal_samples(codec_, all, 11);
    auto opened = run_open(codec_, debug_options(), [&](Engine& e, PartyIndex p) {
      auto inputs = as_inputs(e, dealt[p - 1]);
      std::vector<Secret> out;
      std::size_t offset = 0;
      for (const Window& w : windows) {
        auto f = extract(e, kind,
                         std::span<const SharedSample>(inputs).subspan(offset, w.samples.size()),
                         w.samples.size());
        offset += w.samples.size();
        out.insert(out.end(), f.begin(), f.end());
      }
      return e.open(out);
    }, counters);
    std::vector<std::vector<double>> result;
    std::size_t k = 0;
    for (const Window& w : windows) {
      std::vector<double> v;
      for (std::size_t j = 0; j < feature_dimension(kind, w.samples.size()); ++j) {
        v.push_back(codec_.decode(opened[k++]));
      }
      result.push_back(std::move(v));
    }
    return result;
  }
};

TEST(FeatureKindTest, NamesAndDimensions) {
  EXPECT_EQ(parse_feature_kind("smartfall"), FeatureKind::kSmartfall);
  EXPECT_EQ(parse_feature_kind("derivative"), FeatureKind::kDerivative);
  EXPECT_THROW(parse_feature_kind("fft"), ConfigError);
  EXPECT_EQ(to_string(FeatureKind::kSmartfall), "smartfall");
  EXPECT_EQ(feature_dimension(FeatureKind::kSmartfall), 25u);
  EXPECT_EQ(feature_dimension(FeatureKind::kDerivative), 6u);
}

TEST_F(FeaturesTest, MagnitudeExamples) {
  const std::vector<Sample> samples{{3, 4, 0}, {0, 0, 0}};
  auto dealt = deal_samples(codec_, samples, 3);
  auto out = run_open(codec_, debug_options(), [&](Engine& e, PartyIndex p) {
    auto in = as_inputs(e, dealt[p - 1]);
    return e.open(magnitudes(e, in));
  });
  EXPECT_NEAR(codec_.decode(out[0]), 5.0, 5.0 / 128);
  // Below the square-root domain floor: best effort.
  EXPECT_NEAR(codec_.decode(out[1]), 0.0, kFeatureTolerance);
}

TEST_F(FeaturesTest, MagnitudesMatchFloatingPointOracle) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> axis(-8.0, 8.0);
  std::vector<Sample> samples;
  while (samples.size() < 1000) {
    Sample s{axis(gen), axis(gen), axis(gen)};
    if (std::hypot(s.x, s.y, s.z) >= 0.25) samples.push_back(s);
  }
  auto dealt = deal_samples(codec_, samples, 4);
  auto out = run_open(codec_, RunOptions{}, [&](Engine& e, PartyIndex p) {
    auto m = magnitudes(e, as_inputs(e, dealt[p - 1]));
    for (const Secret& s : m) e.mark_output(s);
    return e.open(m);
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double expected = std::hypot(samples[i].x, samples[i].y, samples[i].z);
    ASSERT_LE(std::fabs(codec_.decode(out[i]) - expected) / expected, 1.0 / 128) << i;
  }
}

TEST_F(FeaturesTest, DeltaSExamples) {
  std::vector<FieldElement> values{codec_.encode(5), codec_.encode(2), codec_.encode(9),
                                   codec_.encode(1.25), codec_.encode(1.25)};
  auto dealt = falldet::testing::deal(codec_.field(), values, {}, 5);
  auto out = run_open(codec_, debug_options(), [&](Engine& e, PartyIndex p) {
    std::vector<Secret> m;
    for (FieldElement s : dealt[p - 1]) m.push_back(e.input(s, 16));
    Secret varied = delta_s(e, std::span<const Secret>(m).first(3));
    Secret flat = delta_s(e, std::span<const Secret>(m).subspan(3));
    return e.open(std::vector<Secret>{varied, flat});
  });
  EXPECT_EQ(out[0], codec_.encode(7));
  EXPECT_EQ(out[1], codec_.field().zero());
}

TEST_F(FeaturesTest, DeltaSOfEmptyVectorThrows) {
  EXPECT_THROW(run_parties(codec_, RunOptions{}, [&](Engine& e, PartyIndex) { delta_s(e, {}); }),
               MalformedInput);
}

TEST_F(FeaturesTest, DeltaSMatchesPlaintextOracle) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> mag(0.0, 13.0);
  constexpr int kWindows = 1000;
  std::vector<FieldElement> values;
  std::vector<double> expected;
  for (int w = 0; w < kWindows; ++w) {
    std::vector<double> m(kDefaultWindowSize);
    for (double& v : m) {
      v = mag(gen);
      values.push_back(codec_.encode(v));
    }
    // Oracle on the encoded values: max - min is exact in fixed point.
    std::vector<double> decoded;
    for (std::size_t j = values.size() - m.size(); j < values.size(); ++j) {
      decoded.push_back(codec_.decode(values[j]));
    }
    const auto [lo, hi] = std::minmax_element(decoded.begin(), decoded.end());
    expected.push_back(*hi - *lo);
  }
  auto dealt = falldet::testing::deal(codec_.field(), values, {}, 6);
  auto out = run_open(codec_, debug_options(), [&](Engine& e, PartyIndex p) {
    std::vector<Secret> all;
    for (FieldElement s : dealt[p - 1]) all.push_back(e.input(s, 16));
    std::vector<Secret> ds;
    for (int w = 0; w < kWindows; ++w) {
      ds.push_back(delta_s(e, std::span<const Secret>(all).subspan(w * kDefaultWindowSize,
                                                                  kDefaultWindowSize)));
    }
    return e.open(ds);
  });
  for (int w = 0; w < kWindows; ++w) ASSERT_EQ(codec_.decode(out[w]), expected[w]) << w;
}

TEST_F(FeaturesTest, SmartfallExamples) {
  std::vector<Sample> spike(kDefaultWindowSize, Sample{0, 0, 1});
  spike[5] = Sample{3, 4, 0};
  auto f = mpc_features({constant_window({0, 0, 0}), window_of(spike)}, FeatureKind::kSmartfall);
  ASSERT_EQ(f[0].size(), 25u);
  for (double v : f[0]) EXPECT_NEAR(v, 0.0, kFeatureTolerance);
  EXPECT_NEAR(f[1][5], 5.0, kFeatureTolerance);
  EXPECT_NEAR(f[1][0], 1.0, kFeatureTolerance);
  EXPECT_NEAR(f[1][24], 4.0, kFeatureTolerance);
}

TEST_F(FeaturesTest, WrongWindowLengthThrows) {
  auto dealt = deal_samples(codec_, constant_window({0, 0, 1}, 23).samples, 1);
  EXPECT_THROW(run_parties(codec_, RunOptions{},
                           [&](Engine& e, PartyIndex p) {
                             smartfall_features(e, as_inputs(e, dealt[p - 1]));
                           }),
               MalformedInput);
  auto short_dealt = deal_samples(codec_, constant_window({0, 0, 1}, 2).samples, 1);
  EXPECT_THROW(run_parties(codec_, RunOptions{},
                           [&](Engine& e, PartyIndex p) {
                             derivative_features(e, as_inputs(e, short_dealt[p - 1]));
                           }),
               MalformedInput);
  EXPECT_THROW(oracle_features(constant_window({0, 0, 1}, 23), FeatureKind::kSmartfall),
               MalformedInput);
  EXPECT_THROW(oracle_features(constant_window({0, 0, 1}, 2), FeatureKind::kDerivative),
               MalformedInput);
}

TEST_F(FeaturesTest, DerivativeExamples) {
  std::vector<Sample> ramp;
  for (std::size_t i = 0; i < kDefaultWindowSize; ++i) {
    ramp.push_back(Sample{static_cast<double>(i + 1), 0, 0});
  }
  auto f = mpc_features({window_of(ramp), constant_window({0.3, -0.7, 1.1})},
                        FeatureKind::kDerivative);
  const double interior = kDefaultWindowSize - 2;
  EXPECT_NEAR(f[0][0], interior, kFeatureTolerance);
  EXPECT_NEAR(f[0][3], interior, kFeatureTolerance);
  for (int j : {1, 2, 4, 5}) EXPECT_NEAR(f[0][j], 0.0, kFeatureTolerance);
  for (double v : f[1]) EXPECT_NEAR(v, 0.0, kFeatureTolerance);
}

TEST(OracleFeaturesTest, Examples) {
  std::vector<Sample> s(kDefaultWindowSize, Sample{0, 0, 1});
  s[0] = Sample{3, 4, 0};
  auto sf = oracle_features(window_of(s), FeatureKind::kSmartfall);
  EXPECT_EQ(sf[0], 5.0);
  EXPECT_EQ(sf[24], 4.0);
  auto d = oracle_features(constant_window({2, 2, 2}), FeatureKind::kDerivative);
  EXPECT_EQ(d, std::vector<double>(6, 0.0));
  std::vector<Sample> ramp;
  for (int i = 0; i < 5; ++i) ramp.push_back(Sample{static_cast<double>(i), 0, 0});
  auto dr = oracle_features(window_of(ramp), FeatureKind::kDerivative, 5);
  EXPECT_EQ(dr[0], 3.0);
  EXPECT_EQ(dr[3], 3.0);
}

TEST_F(FeaturesTest, BothPipelinesMatchOracleOnRandomWindows) {
  std::mt19937_64 gen(21);
  std::vector<Window> windows;
  for (int i = 0; i < 50; ++i) windows.push_back(random_window(gen));
  for (FeatureKind kind : {FeatureKind::kSmartfall, FeatureKind::kDerivative}) {
    auto got = mpc_features(windows, kind);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      auto expected = oracle_features(windows[w], kind);
      for (std::size_t j = 0; j < expected.size(); ++j) {
        ASSERT_NEAR(got[w][j], expected[j], kFeatureTolerance)
            << to_string(kind) << " window " << w << " feature " << j;
      }
    }
  }
}

TEST_F(FeaturesTest, SmartfallNeedsTenTimesTheRoundsOfDerivative) {
  std::mt19937_64 gen(1);
  const Window w = random_window(gen);
  std::vector<mpc::RoundCounter> smart, deriv;
  mpc_features({w}, FeatureKind::kSmartfall, &smart);
  mpc_features({w}, FeatureKind::kDerivative, &deriv);
  // Subtract the final opening added by the helper.
  const auto smart_rounds = smart[0].rounds() - 1;
  const auto deriv_rounds = deriv[0].rounds() - 1;
  EXPECT_GE(smart_rounds, 10 * deriv_rounds) << smart_rounds << " vs " << deriv_rounds;
}

TEST_F(FeaturesTest, DerivativeCommunicatesOnlyForSquares) {
  std::mt19937_64 gen(2);
  auto dealt = deal_samples(codec_, random_window(gen).samples, 1);
  auto counters = run_parties(codec_, RunOptions{}, [&](Engine& e, PartyIndex p) {
    derivative_features(e, as_inputs(e, dealt[p - 1]));
  });
  const auto& ops = counters[0].per_op();
  EXPECT_EQ(ops.at("inner_product"), 1u);
  EXPECT_EQ(ops.size(), 2u);
  EXPECT_EQ(counters[0].rounds(), 1u + ops.at("trunc"));
}

}  // namespace
}  // namespace falldet::features
