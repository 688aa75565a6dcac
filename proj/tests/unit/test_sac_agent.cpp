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
#include <numbers>

#include "../support/gradcheck.hpp"
#include "test_util.hpp"

namespace e2nas {
namespace {

AgentConfig tiny_config() {
  AgentConfig c;
  c.state_dim = 4;
  c.hidden_dims = {16, 16};
  return c;
}

// Sets a network to the constant function c.
void make_constant(nn::ParamSet& p, double c) {
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  p.layers.back().bias.setConstant(c);
}

std::vector<Transition> random_transitions(int n, int psr_dim, Rng& rng, bool done) {
  std::vector<Transition> ts;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.state = SearchState{static_cast<int>(rng.uniform_below(3)), 5 + rng.uniform(), 30 + rng.uniform(),
                          std::vector<double>(static_cast<std::size_t>(psr_dim))};
    for (double& v : t.state.psr) v = 2 * rng.uniform() - 1;
    t.next_state = t.state;
    t.next_state.depth += 1;
    for (double& a : t.action) a = 2 * rng.uniform() - 1;
    t.reward = rng.normal();
    t.done = done;
    ts.push_back(t);
  }
  return ts;
}

TEST(SampleAction, DeterministicModeIsRepeatable) {
  const SacAgent agent(tiny_config(), 1);
  const std::vector<double> s{0.3, -0.2, 0.1, 0.9};
  const auto a = agent.sample_action(s, ActionMode::deterministic, std::vector<double>{}).action;
  const auto b = agent.sample_action(s, ActionMode::deterministic, std::vector<double>{}).action;
  EXPECT_EQ(a, b);
  for (double x : a) {
    EXPECT_GT(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(SampleAction, ZeroNoiseGivesTheSquashedMean) {
  const SacAgent agent(tiny_config(), 2);
  const std::vector<double> s{0.3, -0.2, 0.1, 0.9};
  const std::vector<double> zero(12, 0.0);
  const auto stoch = agent.sample_action(s, ActionMode::stochastic, zero);
  const auto mean = nn::forward(agent.params().policy, s);
  for (int j = 0; j < 12; ++j) EXPECT_DOUBLE_EQ(stoch.action[j], std::tanh(mean[j]));
  EXPECT_EQ(stoch.action, agent.sample_action(s, ActionMode::deterministic, zero).action);
}

TEST(SampleAction, LogProbMatchesLogProbOf) {
  const SacAgent agent(tiny_config(), 3);
  Rng rng(3);
  const std::vector<double> s{0.5, 0.5, -0.5, 0.0};
  for (int i = 0; i < 20; ++i) {
    const ActionSample smp = agent.sample_action(s, ActionMode::stochastic, rng);
    EXPECT_NEAR(smp.log_prob, agent.log_prob_of(s, smp.action), 1e-9);
  }
}

TEST(SampleAction, RejectsBadShapesAndValues) {
  const SacAgent agent(tiny_config(), 4);
  EXPECT_THROW(agent.sample_action(std::vector<double>{1.0}, ActionMode::deterministic, std::vector<double>{}),
               ShapeError);
  EXPECT_THROW(agent.sample_action(std::vector<double>{0, 0, 0, NAN}, ActionMode::deterministic,
                                   std::vector<double>{}),
               NumericDomainError);
  EXPECT_THROW(agent.sample_action(std::vector<double>{0, 0, 0, 0}, ActionMode::stochastic,
                                   std::vector<double>(3, 0.0)),
               ShapeError);
}

// Importance-sampling estimate of the integral of pi(a|s) over (-1, 1)^12,
// drawing from a squashed Gaussian with the same mean and an inflated
// spread whose density is written out independently here.
TEST(SampleAction, DensityIntegratesToOne) {
  const SacAgent agent(tiny_config(), 5);
  const std::vector<double> s{0.2, -0.7, 0.4, 0.1};
  const auto out = nn::forward(agent.params().policy, s);
  constexpr int A = 12;
  std::array<double, A> mean{}, sd{};
  for (int j = 0; j < A; ++j) {
    mean[j] = out[j];
    sd[j] = 1.5 * std::exp(std::clamp(out[A + j], -20.0, 2.0));
  }
  Rng rng(55);
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    ActionVector a{};
    double log_q = 0.0;
    for (int j = 0; j < A; ++j) {
      const double z = rng.normal();
      const double u = mean[j] + sd[j] * z;
      a[j] = std::clamp(std::tanh(u), -1.0 + 1e-15, 1.0 - 1e-15);
      log_q += -0.5 * z * z - std::log(sd[j]) - 0.5 * std::log(2 * std::numbers::pi) -
               std::log1p(-a[j] * a[j]);
    }
    sum += std::exp(agent.log_prob_of(s, a) - log_q);
  }
  const double estimate = sum / n;
  EXPECT_GE(estimate, 0.98);
  EXPECT_LE(estimate, 1.02);
}

TEST(CriticTargets, TerminalTransitionsUseTheRewardAlone) {
  SacAgent agent(tiny_config(), 6);
  Rng rng(6);
  auto ts = random_transitions(5, 1, rng, true);
  ts[0].reward = 0.55;
  const Batch b = make_batch(ts, 3);
  const nn::Vector y = agent.critic_targets(b, rng);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(y(i), ts[i].reward);
  EXPECT_EQ(y(0), 0.55);
}

TEST(CriticTargets, ZeroDiscountGivesTheReward) {
  AgentConfig cfg = tiny_config();
  cfg.gamma = 0.0;
  SacAgent agent(cfg, 7);
  Rng rng(7);
  const auto ts = random_transitions(6, 1, rng, false);
  const nn::Vector y = agent.critic_targets(make_batch(ts, 3), rng);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(y(i), ts[i].reward);
}

TEST(CriticTargets, ConstantCriticsAndNoEntropy) {
  AgentConfig cfg = tiny_config();
  cfg.beta = 0.0;
  SacAgent agent(cfg, 8);
  make_constant(agent.mutable_params().q1_target, 2.5);
  make_constant(agent.mutable_params().q2_target, 2.5);
  Rng rng(8);
  const auto ts = random_transitions(6, 1, rng, false);
  const nn::Vector y = agent.critic_targets(make_batch(ts, 3), rng);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(y(i), ts[i].reward + 0.99 * 2.5, 1e-12);
}

TEST(CriticTargets, TakeTheSmallerTargetCriticAndSubtractTheEntropyTerm) {
  AgentConfig cfg = tiny_config();
  SacAgent agent(cfg, 9);
  make_constant(agent.mutable_params().q1_target, 1.0);
  make_constant(agent.mutable_params().q2_target, -3.0);
  Rng rng(9);
  const auto ts = random_transitions(4, 1, rng, false);
  const Batch b = make_batch(ts, 3);
  const nn::Matrix eps = agent.noise(b.size(), rng);
  const nn::Vector y = agent.critic_targets(b, eps);
  for (int i = 0; i < 4; ++i) {
    const auto s2 = state_vector(ts[i].next_state, 3);
    std::vector<double> e(eps.col(i).data(), eps.col(i).data() + 12);
    const double lp = agent.sample_action(s2, ActionMode::stochastic, e).log_prob;
    EXPECT_NEAR(y(i), ts[i].reward + 0.99 * (-3.0 - 0.2 * lp), 1e-9);
  }
}

TEST(UpdateCritics, ExactFitGivesZeroLossAndGradient) {
  SacAgent agent(tiny_config(), 10);
  make_constant(agent.mutable_params().q1, 0.7);
  Rng rng(10);
  auto ts = random_transitions(8, 1, rng, true);
  for (auto& t : ts) t.reward = 0.7;
  const Batch b = make_batch(ts, 3);
  nn::Matrix sa(b.states.rows() + 12, b.size());
  sa << b.states, b.actions;
  const LossAndGrad lg = SacAgent::critic_loss_and_grad(agent.params().q1, sa, agent.critic_targets(b, rng));
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(UpdateCritics, LossDecreasesOnAFixedBatch) {
  SacAgent agent(tiny_config(), 11);
  Rng rng(11);
  const Batch b = make_batch(random_transitions(32, 1, rng, true), 3);
  const double first = agent.update_critics(b, rng);
  double last = first;
  for (int k = 0; k < 400; ++k) last = agent.update_critics(b, rng);
  EXPECT_LT(last, 0.5 * first);
}

TEST(Gradients, CriticAndPolicyMatchFiniteDifferences) {
  Rng rng(12);
  for (int c = 0; c < 60; ++c) {
    EXPECT_LE(gradcheck::critic_case(rng).max_rel, gradcheck::kTolerance);
    EXPECT_LE(gradcheck::policy_case(rng).max_rel, gradcheck::kTolerance);
  }
}

TEST(UpdatePolicy, NoEntropyAndConstantCriticsGiveZeroGradient) {
  AgentConfig cfg = tiny_config();
  cfg.beta = 0.0;
  SacAgent agent(cfg, 13);
  make_constant(agent.mutable_params().q1, 4.0);
  make_constant(agent.mutable_params().q2, 4.0);
  Rng rng(13);
  const Batch b = make_batch(random_transitions(8, 1, rng, false), 3);
  const LossAndGrad lg = agent.policy_loss_and_grad(agent.params().policy, b.states, agent.noise(8, rng));
  EXPECT_DOUBLE_EQ(lg.loss, -4.0);
  for (double g : lg.grad.flatten()) EXPECT_EQ(g, 0.0);
}

// One-step bandit over the 36 cell-0 genes: each partition that agrees with
// a fixed dominant gene earns a quarter of the reward.
TEST(UpdatePolicy, BanditConvergesToTheDominantGene) {
  const CellGene dominant{ConvType::post_activation, NormType::none, UpsampleType::nearest, false, {}};
  auto payoff = [&](const CellGene& g) {
    return 0.25 * ((g.conv == dominant.conv) + (g.norm == dominant.norm) + (g.up == dominant.up) +
                   (g.shortcut == dominant.shortcut));
  };
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AgentConfig cfg;
    cfg.state_dim = 4;
    cfg.hidden_dims = {32, 32};
    cfg.batch_size = 32;
    cfg.beta = 0.01;
    cfg.lr_policy = 1e-3;
    cfg.lr_critic = 1e-3;
    SacAgent agent(cfg, seed);
    ReplayBuffer buffer(10'000);
    Rng rng(hash_words(seed, {77}));
    const SearchState s0 = initial_state(1);
    const auto sv = state_vector(s0, 1);
    int updates = 0;
    while (updates < 2000) {
      const ActionVector a = agent.sample_action(sv, ActionMode::stochastic, rng).action;
      const CellGene g = decode_action(a, 0, 1);
      SearchState s1{1, 0.0, 0.0, {0.0}};
      buffer.push({s0, a, payoff(g), s1, true});
      if (buffer.len() >= 64) {
        const auto batch = buffer.sample(32, rng);
        agent.update(make_batch(batch, 1), rng);
        ++updates;
      }
    }
    const ActionVector a = agent.sample_action(sv, ActionMode::deterministic, rng).action;
    converged += decode_action(a, 0, 1) == dominant;
  }
  EXPECT_GE(converged, 9);
}

TEST(UpdateTargets, EdgeCasesOfTau) {
  AgentConfig cfg = tiny_config();
  cfg.tau = 1.0;
  SacAgent one(cfg, 14);
  Rng rng(14);
  one.update_critics(make_batch(random_transitions(8, 1, rng, false), 3), rng);
  one.update_targets();
  EXPECT_EQ(one.params().q1_target, one.params().q1);
  EXPECT_EQ(one.params().q2_target, one.params().q2);
  EXPECT_EQ(one.params().policy_target, one.params().policy);

  cfg.tau = 0.0;
  SacAgent zero(cfg, 14);
  const AgentParams before = zero.params();
  zero.update_critics(make_batch(random_transitions(8, 1, rng, false), 3), rng);
  zero.update_targets();
  EXPECT_EQ(zero.params().q1_target, before.q1_target);
  EXPECT_EQ(zero.params().q2_target, before.q2_target);
}

TEST(UpdateTargets, ConvergeGeometricallyToFrozenOnlineNets) {
  AgentConfig cfg = tiny_config();
  cfg.tau = 0.1;
  SacAgent agent(cfg, 15);
  Rng rng(15);
  agent.mutable_params().q1 = nn::init_params(agent.params().q1.spec(), rng);
  auto dist = [&] {
    const auto a = agent.params().q1_target.flatten(), b = agent.params().q1.flatten();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  double prev = dist();
  ASSERT_GT(prev, 0.0);
  for (int k = 0; k < 50; ++k) {
    agent.update_targets();
    const double d = dist();
    EXPECT_NEAR(d / prev, 0.9, 1e-12);
    prev = d;
  }
}

TEST(Persistence, SaveLoadRoundTripAndConfigCheck) {
  testing::TempDir dir("agent");
  SacAgent agent(tiny_config(), 16);
  Rng rng(16);
  for (int k = 0; k < 3; ++k) agent.update(make_batch(random_transitions(8, 1, rng, false), 3), rng);
  agent.save(dir / "agent.ckpt");
  SacAgent restored(tiny_config(), 99);
  restored.load(dir / "agent.ckpt");
  EXPECT_EQ(restored.params(), agent.params());

  AgentConfig other = tiny_config();
  other.beta = 0.3;
  SacAgent mismatched(other, 16);
  EXPECT_THROW(mismatched.load(dir / "agent.ckpt"), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  AgentConfig c = tiny_config();
  c.gamma = 1.5;
  EXPECT_THROW(SacAgent(c, 0), InvalidArgument);
  c = tiny_config();
  c.beta = -1;
  EXPECT_THROW(SacAgent(c, 0), InvalidArgument);
  c = tiny_config();
  c.action_dim = 13;
  EXPECT_THROW(SacAgent(c, 0), InvalidArgument);
}

}  // namespace
}  // namespace e2nas
