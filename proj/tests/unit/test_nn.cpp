// Copyright 2026 The e2nas Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/gradcheck.hpp"
#include "test_util.hpp"

namespace e2nas::nn {
namespace {

// Plain-loop reference forward pass: ReLU hidden layers, linear output.
std::vector<double> reference_forward(const ParamSet& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& W = p.layers[l].weight;
    std::vector<double> y(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double acc = p.layers[l].bias(i);
      for (Eigen::Index j = 0; j < W.cols(); ++j) acc += W(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = (l + 1 < p.layers.size()) ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

TEST(Forward, ZeroParamsGiveZeroOutput) {
  const ParamSet p = zeros({3, {5, 4}, 2});
  const std::vector<double> x{1.0, -2.0, 3.0};
  for (double y : forward(p, x)) EXPECT_EQ(y, 0.0);
}

TEST(Forward, IdentityLayerIsTheIdentity) {
  ParamSet p = zeros({4, {}, 4});
  p.layers[0].weight.setIdentity();
  const std::vector<double> x{0.5, -1.5, 2.0, 7.0};
  EXPECT_EQ(forward(p, x), x);
}

TEST(Forward, MatchesTheReferenceImplementation) {
  Rng rng(1);
  for (int c = 0; c < 100; ++c) {
    const MlpSpec spec{1 + static_cast<int>(rng.uniform_below(8)), gradcheck::random_hidden(rng),
                       1 + static_cast<int>(rng.uniform_below(8))};
    ParamSet p = init_params(spec, rng);
    for (auto& l : p.layers) l.bias = gradcheck::random_matrix(l.bias.size(), 1, rng, 0.3);
    std::vector<double> x(static_cast<std::size_t>(spec.input_dim));
    for (double& v : x) v = rng.normal();
    const auto got = forward(p, x);
    const auto want = reference_forward(p, x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Forward, BatchColumnsAreIndependentSamples) {
  Rng rng(2);
  const ParamSet p = init_params({3, {6}, 2}, rng);
  const Matrix x = gradcheck::random_matrix(3, 5, rng);
  const Matrix y = forward_batch(p, x);
  for (Eigen::Index c = 0; c < 5; ++c) {
    const std::vector<double> col(x.col(c).data(), x.col(c).data() + 3);
    const auto single = forward(p, col);
    EXPECT_NEAR(y(0, c), single[0], 1e-14);
    EXPECT_NEAR(y(1, c), single[1], 1e-14);
  }
}

TEST(Forward, RejectsWrongInputDimension) {
  const ParamSet p = zeros({3, {}, 1});
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(forward(p, x), ShapeError);
  EXPECT_THROW(zeros({0, {}, 1}), ShapeError);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int c = 0; c < 100; ++c) EXPECT_LE(gradcheck::mlp_case(rng).max_rel, gradcheck::kTolerance);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(4);
  const ParamSet p = init_params({3, {4}, 2}, rng);
  const Gradients g = backward(p, std::vector<double>{1, 2, 3}, std::vector<double>{0, 0});
  for (double v : g.params.flatten()) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Backward, LinearNetWeightGradientIsTheOuterProduct) {
  Rng rng(5);
  const ParamSet p = init_params({3, {}, 2}, rng);
  const std::vector<double> x{0.5, -1.0, 2.0}, up{3.0, -0.25};
  const Gradients g = backward(p, x, up);
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(g.params.layers[0].bias(i), up[i]);
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g.params.layers[0].weight(i, j), up[i] * x[j]);
  }
}

TEST(Adam, ZeroGradientLeavesEverythingUnchanged) {
  Rng rng(6);
  ParamSet p = init_params({3, {4}, 2}, rng);
  const ParamSet before = p;
  AdamState st = make_adam(p);
  adam_step(p, zeros_like(p), st, 1e-3);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.m, zeros_like(p));
  EXPECT_EQ(st.v, zeros_like(p));
}

TEST(Adam, FirstStepMatchesTheClosedForm) {
  Rng rng(7);
  ParamSet p = init_params({3, {4}, 2}, rng);
  ParamSet g = zeros_like(p);
  auto flat = g.flatten();
  for (double& v : flat) v = rng.normal();
  g.assign_flat(flat);
  const auto before = p.flatten();
  AdamState st = make_adam(p);
  const double lr = 3e-4;
  adam_step(p, g, st, lr);
  const auto after = p.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double expected = -lr * flat[i] / (std::sqrt(flat[i] * flat[i]) + 1e-8);
    EXPECT_NEAR(after[i] - before[i], expected, 1e-12);
  }
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    Rng rng(8);
    ParamSet p = init_params({4, {5}, 3}, rng);
    AdamState st = make_adam(p);
    for (int k = 0; k < 20; ++k) {
      ParamSet g = zeros_like(p);
      auto flat = g.flatten();
      for (double& v : flat) v = rng.normal();
      g.assign_flat(flat);
      adam_step(p, g, st, 1e-2);
    }
    return std::make_pair(p, st);
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, MinimizesAQuadratic) {
  ParamSet p = zeros({1, {}, 1});
  p.layers[0].weight(0, 0) = 5.0;
  AdamState st = make_adam(p);
  for (int k = 0; k < 3000; ++k) {
    ParamSet g = zeros_like(p);
    g.layers[0].weight(0, 0) = 2.0 * (p.layers[0].weight(0, 0) - 1.0);
    adam_step(p, g, st, 1e-2);
  }
  EXPECT_NEAR(p.layers[0].weight(0, 0), 1.0, 1e-3);
}

TEST(SoftUpdate, EdgeCasesAreExact) {
  Rng rng(9);
  const ParamSet target = init_params({3, {4}, 2}, rng);
  const ParamSet online = init_params({3, {4}, 2}, rng);
  EXPECT_EQ(soft_update(target, online, 1.0), online);
  EXPECT_EQ(soft_update(target, online, 0.0), target);
}

TEST(SoftUpdate, MatchesTheElementwiseFormula) {
  Rng rng(10);
  const ParamSet target = init_params({6, {8, 8}, 3}, rng);
  const ParamSet online = init_params({6, {8, 8}, 3}, rng);
  const double tau = 0.005;
  const auto t = target.flatten(), o = online.flatten(), got = soft_update(target, online, tau).flatten();
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(got[i], tau * o[i] + (1.0 - tau) * t[i], 1e-15);
}

TEST(SoftUpdate, RejectsBadTauAndMismatchedShapes) {
  Rng rng(11);
  const ParamSet a = init_params({3, {4}, 2}, rng);
  const ParamSet b = init_params({3, {5}, 2}, rng);
  EXPECT_THROW(soft_update(a, a, 1.5), InvalidArgument);
  EXPECT_THROW(soft_update(a, a, -0.1), InvalidArgument);
  EXPECT_THROW(soft_update(a, b, 0.5), ShapeError);
}

TEST(ParamSet, FlattenRoundTripsAndSectionsPreserveEverything) {
  Rng rng(12);
  const ParamSet p = init_params({5, {7, 3}, 2}, rng);
  ParamSet q = zeros(p.spec());
  q.assign_flat(p.flatten());
  EXPECT_EQ(p, q);
  EXPECT_EQ(p.size(), p.flatten().size());
  EXPECT_EQ(from_section(to_section("x", p)), p);
  Section broken = to_section("x", p);
  broken.data.pop_back();
  EXPECT_THROW(from_section(broken), FormatError);
}

}  // namespace
}  // namespace e2nas::nn
