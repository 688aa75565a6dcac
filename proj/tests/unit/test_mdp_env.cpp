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

#include "test_util.hpp"

namespace e2nas {
namespace {

// Evaluator returning scripted results, for exact reward arithmetic.
class ScriptedEvaluator final : public Evaluator {
 public:
  explicit ScriptedEvaluator(std::vector<EvalResult> script) : script_(std::move(script)) {}
  EvalResult evaluate(const Genotype& prefix, int) override {
    last_prefix = prefix;
    if (fail_next) throw RemoteError("scripted failure");
    return script_.at(static_cast<std::size_t>(prefix.depth() - 1));
  }
  void reset_weights() override { ++resets; }
  EvaluatorDescriptor descriptor() const override { return {"scripted", 2}; }

  Genotype last_prefix;
  int resets = 0;
  bool fail_next = false;

 private:
  std::vector<EvalResult> script_;
};

TEST(Reward, MatchesHandComputedValues) {
  EXPECT_NEAR(reward(8.0, 20.0, 8.5, 15.0, {0.01}), 0.55, 1e-12);
  EXPECT_NEAR(reward(7.0, 30.0, 7.5, 33.0, {0.0}), 0.5, 1e-12);
  for (double alpha : {0.0, 0.01, 1.0, 3.5}) {
    EXPECT_EQ(reward(6.25, 17.0, 6.25, 17.0, {alpha}), 0.0);
  }
}

TEST(Reward, RejectsNonFiniteInputs) {
  EXPECT_THROW(reward(NAN, 0, 0, 0, {}), NumericDomainError);
  EXPECT_THROW(reward(0, 0, INFINITY, 0, {}), NumericDomainError);
  EXPECT_THROW(reward(0, 0, 0, 0, {NAN}), NumericDomainError);
}

TEST(StateVector, ScalesAndAppendsPsr) {
  const SearchState s{2, 7.5, 30.0, {0.25, -0.5}};
  const auto v = state_vector(s, 3);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_DOUBLE_EQ(v[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v[1], 0.75);
  EXPECT_DOUBLE_EQ(v[2], 0.3);
  EXPECT_DOUBLE_EQ(v[3], 0.25);
  EXPECT_DOUBLE_EQ(v[4], -0.5);
}

TEST(SearchEnv, ResetYieldsTheInitialState) {
  SurrogateEvaluator ev(SurrogateSpec{});
  SearchEnv env(ev, {});
  const SearchState s0 = env.reset();
  EXPECT_EQ(s0, (SearchState{0, 0.0, 0.0, std::vector<double>(64, 0.0)}));
  EXPECT_EQ(env.reset(), s0);
  const ActionVector a{};
  while (!env.done()) env.step(a);
  EXPECT_EQ(env.reset(), s0);
  EXPECT_EQ(env.prefix().depth(), 0);
}

TEST(SearchEnv, FirstStepRewardAgainstTheZeroBaseline) {
  ScriptedEvaluator ev({{5.2, 38.0, {0.1, 0.2}}, {6.0, 30.0, {0, 0}}, {7.0, 20.0, {0, 0}}});
  SearchEnv env(ev, {});
  const StepResult r = env.step(ActionVector{});
  EXPECT_NEAR(r.reward, 4.82, 1e-12);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.next_state, (SearchState{1, 5.2, 38.0, {0.1, 0.2}}));
}

TEST(SearchEnv, ThirdStepEndsTheEpisode) {
  ScriptedEvaluator ev({{5, 40, {0, 0}}, {6, 30, {0, 0}}, {7, 20, {0, 0}}});
  SearchEnv env(ev, {});
  EXPECT_FALSE(env.step(ActionVector{}).done);
  EXPECT_FALSE(env.step(ActionVector{}).done);
  const StepResult last = env.step(ActionVector{});
  EXPECT_TRUE(last.done);
  EXPECT_EQ(last.next_state.depth, 3);
  EXPECT_THROW(env.step(ActionVector{}), InvalidStateError);
}

TEST(SearchEnv, ResetDoesNotTouchEvaluatorWeights) {
  ScriptedEvaluator ev({{5, 40, {0, 0}}});
  SearchEnv env(ev, {});
  env.reset();
  env.reset();
  EXPECT_EQ(ev.resets, 0);
}

TEST(SearchEnv, EvaluatorFailureCarriesThePrefixAndAbortsTheEpisode) {
  ScriptedEvaluator ev({{5, 40, {0, 0}}, {6, 30, {0, 0}}});
  SearchEnv env(ev, {});
  env.step(ActionVector{});
  ev.fail_next = true;
  try {
    env.step(encode_center(CellGene{ConvType::post_activation, NormType::none, UpsampleType::deconv,
                                    false, {true}}));
    FAIL() << "expected an evaluation error";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.prefix().depth(), 2);
    EXPECT_EQ(e.prefix().cells[1].up, UpsampleType::deconv);
    EXPECT_FALSE(e.connection_lost());
    EXPECT_THROW(std::rethrow_exception(e.cause()), RemoteError);
  }
  ev.fail_next = false;
  EXPECT_THROW(env.step(ActionVector{}), InvalidStateError);
  env.reset();
  EXPECT_NO_THROW(env.step(ActionVector{}));
}

TEST(SearchEnv, MalformedResultsAreRejected) {
  ScriptedEvaluator wrong_dim({{5, 40, {0.0}}});
  SearchEnv env(wrong_dim, {});
  EXPECT_THROW(env.step(ActionVector{}), EvaluationError);
  ScriptedEvaluator non_finite({{5, 40, {0.0, NAN}}});
  SearchEnv env2(non_finite, {});
  EXPECT_THROW(env2.step(ActionVector{}), EvaluationError);
}

TEST(CumulativeReturn, SingleStepEpisode) {
  ScriptedEvaluator ev({{6.0, 30.0, {0, 0}}});
  SearchEnv env(ev, EnvConfig{1, 1, {0.01}});
  const SearchState s0 = env.state();
  const ActionVector a{};
  const StepResult r = env.step(a);
  const std::vector<Transition> traj{{s0, a, r.reward, r.next_state, r.done}};
  EXPECT_NEAR(cumulative_return(traj), 5.7, 1e-12);
}

TEST(CumulativeReturn, TelescopesOverRandomSurrogateEpisodes) {
  SurrogateEvaluator ev(SurrogateSpec{});
  SearchEnv env(ev, {});
  Rng rng(21);
  for (int episode = 0; episode < 200; ++episode) {
    ev.reset_weights();
    env.reset();
    std::vector<Transition> traj;
    EvalResult last;
    while (!env.done()) {
      ActionVector a;
      for (double& x : a) x = 2.0 * rng.uniform() - 1.0;
      const SearchState s = env.state();
      const StepResult r = env.step(a);
      traj.push_back({s, a, r.reward, r.next_state, r.done});
    }
    const SearchState& fin = traj.back().next_state;
    EXPECT_NEAR(cumulative_return(traj), fin.is_score - 0.01 * fin.fid_score, 1e-9);
  }
}

TEST(CumulativeReturn, RejectsMalformedTrajectories) {
  EXPECT_THROW(cumulative_return(std::vector<Transition>{}), ValidationError);
  SurrogateEvaluator ev(SurrogateSpec{});
  SearchEnv env(ev, {});
  std::vector<Transition> traj;
  while (!env.done()) {
    const SearchState s = env.state();
    const StepResult r = env.step(ActionVector{});
    traj.push_back({s, ActionVector{}, r.reward, r.next_state, r.done});
  }
  EXPECT_THROW(cumulative_return(std::span<const Transition>(traj).subspan(1)), ValidationError);
  EXPECT_THROW(cumulative_return(std::span<const Transition>(traj).first(2)), ValidationError);
  auto broken = traj;
  broken[2].state.depth = 1;
  EXPECT_THROW(cumulative_return(broken), ValidationError);
}

}  // namespace
}  // namespace e2nas
