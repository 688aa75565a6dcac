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

#pragma once

// Soft actor-critic over the 12-dim action space.
//
// Policy: MLP state -> [mean(12), log_std(12)], log_std clamped to
// [-20, 2], action a = tanh(mean + std * eps). Critics: MLPs [state; action]
// -> scalar, twin by default, each with a soft-updated target copy.
//
// Critic target (soft Bellman):
//   y = r                                              terminal
//   y = r + gamma * (min_i Qbar_i(s', a') - beta * log pi(a'|s'))   otherwise,
// with a' sampled fresh from the current policy at s'.
// Policy objective: mean_n [beta * log pi(f(eps, s)|s) - min_i Q_i(s, f(eps, s))].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "e2nas/binary_io.hpp"
#include "e2nas/errors.hpp"
#include "e2nas/genotype.hpp"
#include "e2nas/mdp_env.hpp"
#include "e2nas/nn.hpp"
#include "e2nas/random.hpp"

namespace e2nas {

struct AgentConfig {
  double beta = 0.2;
  double gamma = 0.99;
  double tau = 0.005;
  double lr_policy = 3e-4;
  double lr_critic = 3e-4;
  int batch_size = 64;
  std::vector<int> hidden_dims{128, 128};
  int state_dim = 3 + 64;
  int action_dim = kActionDim;  // the search always uses 12; smaller nets are handy for checks
  bool twin_q = true;
  bool use_target_policy = false;

  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

inline void validate(const AgentConfig& c) {
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw InvalidArgument("beta must be finite and >= 0");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
  if (!(c.tau >= 0.0 && c.tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
  if (!(c.lr_policy > 0.0) || !(c.lr_critic > 0.0)) throw InvalidArgument("learning rates must be > 0");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (c.state_dim < 1) throw InvalidArgument("state_dim must be >= 1");
  if (c.action_dim < 1 || c.action_dim > kActionDim) throw InvalidArgument("action_dim must lie in [1, 12]");
  for (int h : c.hidden_dims) {
    if (h < 1) throw InvalidArgument("hidden dims must be >= 1");
  }
}

inline nlohmann::json to_json(const AgentConfig& c) {
  return {{"beta", c.beta},
          {"gamma", c.gamma},
          {"tau", c.tau},
          {"lr_policy", c.lr_policy},
          {"lr_critic", c.lr_critic},
          {"batch_size", c.batch_size},
          {"hidden_dims", c.hidden_dims},
          {"state_dim", c.state_dim},
          {"action_dim", c.action_dim},
          {"twin_q", c.twin_q},
          {"use_target_policy", c.use_target_policy}};
}

inline std::string hash_hex(const nlohmann::json& j) {
  const std::string s = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
  return buf;
}

struct AgentParams {
  nn::ParamSet policy;
  nn::ParamSet policy_target;
  nn::ParamSet q1, q2;
  nn::ParamSet q1_target, q2_target;
  nn::AdamState adam_policy, adam_q1, adam_q2;

  friend bool operator==(const AgentParams&, const AgentParams&) = default;
};

// Vectorized minibatch: one sample per column.
struct Batch {
  nn::Matrix states;       // state_dim x N
  nn::Matrix actions;      // action_dim x N
  nn::Vector rewards;      // N
  nn::Matrix next_states;  // state_dim x N
  std::vector<bool> done;

  Eigen::Index size() const { return states.cols(); }
};

inline Batch make_batch(std::span<const Transition> ts, int max_cells,
                        const StateScales& scales = {}) {
  if (ts.empty()) throw InvalidArgument("empty batch");
  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto sdim = static_cast<Eigen::Index>(3 + ts.front().state.psr.size());
  Batch b{nn::Matrix(sdim, n), nn::Matrix(kActionDim, n), nn::Vector(n), nn::Matrix(sdim, n), {}};
  b.done.resize(ts.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = ts[static_cast<std::size_t>(i)];
    const auto s = state_vector(t.state, max_cells, scales);
    const auto s2 = state_vector(t.next_state, max_cells, scales);
    if (static_cast<Eigen::Index>(s.size()) != sdim || static_cast<Eigen::Index>(s2.size()) != sdim) {
      throw ShapeError("transitions disagree on state dimension");
    }
    b.states.col(i) = Eigen::Map<const nn::Vector>(s.data(), sdim);
    b.next_states.col(i) = Eigen::Map<const nn::Vector>(s2.data(), sdim);
    b.actions.col(i) = Eigen::Map<const nn::Vector>(t.action.data(), kActionDim);
    b.rewards(i) = t.reward;
    b.done[static_cast<std::size_t>(i)] = t.done;
  }
  return b;
}

enum class ActionMode { stochastic, deterministic };

struct ActionSample {
  ActionVector action{};
  double log_prob = 0.0;
};

struct LossAndGrad {
  double loss = 0.0;
  nn::ParamSet grad;
};

class SacAgent {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;
  static constexpr double kSquashGuard = 1e-6;

  SacAgent(const AgentConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    validate(cfg_);
    Rng rng(hash_words(seed, {0xa9e47}));
    const int sa = cfg_.state_dim + cfg_.action_dim;
    p_.policy = nn::init_params({cfg_.state_dim, cfg_.hidden_dims, 2 * cfg_.action_dim}, rng);
    p_.q1 = nn::init_params({sa, cfg_.hidden_dims, 1}, rng);
    p_.q2 = nn::init_params({sa, cfg_.hidden_dims, 1}, rng);
    p_.policy_target = p_.policy;
    p_.q1_target = p_.q1;
    p_.q2_target = p_.q2;
    p_.adam_policy = nn::make_adam(p_.policy);
    p_.adam_q1 = nn::make_adam(p_.q1);
    p_.adam_q2 = nn::make_adam(p_.q2);
  }

  const AgentConfig& config() const noexcept { return cfg_; }
  const AgentParams& params() const noexcept { return p_; }
  AgentParams& mutable_params() noexcept { return p_; }

  // --- acting ---------------------------------------------------------------

  ActionSample sample_action(std::span<const double> state, ActionMode mode,
                             std::span<const double> eps) const {
    check_state(state);
    if (mode == ActionMode::stochastic && static_cast<int>(eps.size()) != cfg_.action_dim) {
      throw ShapeError("noise vector must have dimension " + std::to_string(cfg_.action_dim));
    }
    const nn::Matrix s = Eigen::Map<const nn::Vector>(state.data(), cfg_.state_dim);
    const nn::Matrix out = nn::forward_batch(p_.policy, s);
    ActionSample r;
    if (mode == ActionMode::deterministic) {
      for (int j = 0; j < cfg_.action_dim; ++j) r.action[j] = squash(out(j, 0));
      return r;
    }
    nn::Matrix e = Eigen::Map<const nn::Vector>(eps.data(), cfg_.action_dim);
    const Sampled smp = sample_from(out, e);
    for (int j = 0; j < cfg_.action_dim; ++j) r.action[j] = smp.a(j, 0);
    r.log_prob = smp.log_prob(0);
    return r;
  }

  ActionSample sample_action(std::span<const double> state, ActionMode mode, Rng& rng) const {
    std::vector<double> eps(static_cast<std::size_t>(cfg_.action_dim));
    if (mode == ActionMode::stochastic) {
      for (auto& e : eps) e = rng.normal();
    }
    return sample_action(state, mode, eps);
  }

  // log pi(a|s) for an arbitrary action strictly inside (-1, 1).
  double log_prob_of(std::span<const double> state, const ActionVector& a) const {
    check_state(state);
    const nn::Matrix s = Eigen::Map<const nn::Vector>(state.data(), cfg_.state_dim);
    const nn::Matrix out = nn::forward_batch(p_.policy, s);
    double lp = 0.0;
    for (int j = 0; j < cfg_.action_dim; ++j) {
      const double ls = std::clamp(out(cfg_.action_dim + j, 0), kLogStdMin, kLogStdMax);
      const double u = std::atanh(a[j]);
      const double e = (u - out(j, 0)) / std::exp(ls);
      lp += -0.5 * e * e - ls - 0.5 * std::log(2.0 * std::numbers::pi) -
            std::log(1.0 - a[j] * a[j] + kSquashGuard);
    }
    return lp;
  }

  // --- learning ---------------------------------------------------------------

  // Soft Bellman targets; eps holds one column of standard-normal noise per
  // sample, used to draw a' at the next state.
  nn::Vector critic_targets(const Batch& b, const nn::Matrix& eps) const {
    check_batch(b);
    const nn::ParamSet& pol = cfg_.use_target_policy ? p_.policy_target : p_.policy;
    const Sampled next = sample_from(nn::forward_batch(pol, b.next_states), eps);
    const nn::Matrix sa = stack(b.next_states, next.a);
    const nn::Matrix q1 = nn::forward_batch(p_.q1_target, sa);
    nn::Matrix qmin = q1;
    if (cfg_.twin_q) qmin = q1.cwiseMin(nn::forward_batch(p_.q2_target, sa));
    nn::Vector y(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      y(i) = b.rewards(i);
      if (!b.done[static_cast<std::size_t>(i)]) {
        y(i) += cfg_.gamma * (qmin(0, i) - cfg_.beta * next.log_prob(i));
      }
    }
    return y;
  }

  nn::Vector critic_targets(const Batch& b, Rng& rng) const { return critic_targets(b, noise(b.size(), rng)); }

  // 1/2 mean (Q(s,a) - y)^2 and its parameter gradient.
  static LossAndGrad critic_loss_and_grad(const nn::ParamSet& q, const nn::Matrix& sa,
                                          const nn::Vector& y) {
    nn::ForwardCache cache;
    const nn::Matrix out = nn::forward_batch(q, sa, &cache);
    const double n = static_cast<double>(sa.cols());
    const nn::Matrix diff = out - y.transpose();
    LossAndGrad r;
    r.loss = 0.5 * diff.squaredNorm() / n;
    r.grad = nn::backward_batch(q, cache, diff / n).params;
    return r;
  }

  // One Adam step on each critic against shared targets. Returns the summed
  // pre-step loss of the critics.
  double update_critics(const Batch& b, const nn::Matrix& eps) {
    const nn::Vector y = critic_targets(b, eps);
    const nn::Matrix sa = stack(b.states, b.actions);
    LossAndGrad g1 = critic_loss_and_grad(p_.q1, sa, y);
    nn::adam_step(p_.q1, g1.grad, p_.adam_q1, cfg_.lr_critic);
    double loss = g1.loss;
    if (cfg_.twin_q) {
      LossAndGrad g2 = critic_loss_and_grad(p_.q2, sa, y);
      nn::adam_step(p_.q2, g2.grad, p_.adam_q2, cfg_.lr_critic);
      loss += g2.loss;
    }
    return loss;
  }
  double update_critics(const Batch& b, Rng& rng) { return update_critics(b, noise(b.size(), rng)); }

  // Reparameterized policy objective and its gradient w.r.t. the given policy
  // parameters, holding the current critics fixed.
  LossAndGrad policy_loss_and_grad(const nn::ParamSet& policy, const nn::Matrix& states,
                                   const nn::Matrix& eps) const {
    nn::ForwardCache pc;
    const nn::Matrix out = nn::forward_batch(policy, states, &pc);
    const Sampled smp = sample_from(out, eps);
    const Eigen::Index n = states.cols();
    const int A = cfg_.action_dim;
    const nn::Matrix sa = stack(states, smp.a);

    nn::ForwardCache c1, c2;
    const nn::Matrix q1 = nn::forward_batch(p_.q1, sa, &c1);
    nn::Matrix q2;
    if (cfg_.twin_q) q2 = nn::forward_batch(p_.q2, sa, &c2);

    // Route each sample's gradient through whichever critic is smaller.
    nn::Matrix up1 = nn::Matrix::Zero(1, n), up2 = nn::Matrix::Zero(1, n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool first = !cfg_.twin_q || q1(0, i) <= q2(0, i);
      const double qmin = first ? q1(0, i) : q2(0, i);
      (first ? up1 : up2)(0, i) = 1.0;
      loss += cfg_.beta * smp.log_prob(i) - qmin;
    }
    loss /= static_cast<double>(n);
    nn::Matrix dq_da = nn::backward_batch(p_.q1, c1, up1).input.bottomRows(A);
    if (cfg_.twin_q) dq_da += nn::backward_batch(p_.q2, c2, up2).input.bottomRows(A);

    nn::Matrix d_out(2 * A, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < A; ++j) {
        const double a = smp.a(j, i);
        const double dl_da =
            cfg_.beta * 2.0 * a / (1.0 - a * a + kSquashGuard) - dq_da(j, i);
        const double dl_du = dl_da * (1.0 - a * a);
        d_out(j, i) = dl_du;
        const double raw_ls = out(A + j, i);
        const bool inside = raw_ls > kLogStdMin && raw_ls < kLogStdMax;
        d_out(A + j, i) = inside ? dl_du * smp.stddev(j, i) * eps(j, i) - cfg_.beta : 0.0;
      }
    }
    d_out /= static_cast<double>(n);
    return {loss, nn::backward_batch(policy, pc, d_out).params};
  }

  double update_policy(const Batch& b, const nn::Matrix& eps) {
    LossAndGrad g = policy_loss_and_grad(p_.policy, b.states, eps);
    nn::adam_step(p_.policy, g.grad, p_.adam_policy, cfg_.lr_policy);
    return g.loss;
  }
  double update_policy(const Batch& b, Rng& rng) { return update_policy(b, noise(b.size(), rng)); }

  void update_targets() {
    p_.q1_target = nn::soft_update(p_.q1_target, p_.q1, cfg_.tau);
    if (cfg_.twin_q) p_.q2_target = nn::soft_update(p_.q2_target, p_.q2, cfg_.tau);
    p_.policy_target = nn::soft_update(p_.policy_target, p_.policy, cfg_.tau);
  }

  // Critic step, policy step, target step.
  void update(const Batch& b, Rng& rng) {
    update_critics(b, rng);
    update_policy(b, rng);
    update_targets();
  }

  nn::Matrix noise(Eigen::Index n, Rng& rng) const {
    nn::Matrix e(cfg_.action_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < cfg_.action_dim; ++j) e(j, i) = rng.normal();
    }
    return e;
  }

  // --- persistence ------------------------------------------------------------

  std::string config_hash() const { return hash_hex(to_json(cfg_)); }

  Container to_container() const {
    Container c;
    Section meta;
    meta.name = "meta";
    meta.header = {{"config", to_json(cfg_)}, {"config_hash", config_hash()}};
    c.sections.push_back(std::move(meta));
    c.sections.push_back(nn::to_section("policy", p_.policy));
    c.sections.push_back(nn::to_section("policy_target", p_.policy_target));
    c.sections.push_back(nn::to_section("q1", p_.q1));
    c.sections.push_back(nn::to_section("q2", p_.q2));
    c.sections.push_back(nn::to_section("q1_target", p_.q1_target));
    c.sections.push_back(nn::to_section("q2_target", p_.q2_target));
    auto add_adam = [&c](const std::string& name, const nn::AdamState& st) {
      for (auto& s : nn::to_sections(name, st)) c.sections.push_back(std::move(s));
    };
    add_adam(kAdamPolicy, p_.adam_policy);
    add_adam(kAdamQ1, p_.adam_q1);
    add_adam(kAdamQ2, p_.adam_q2);
    return c;
  }

  void save(const std::filesystem::path& path) const { write_container(path, to_container()); }

  // Restores parameters saved by an agent with the same configuration.
  void load(const Container& c) {
    const std::string h = c.at("meta").header.at("config_hash").get<std::string>();
    if (h != config_hash()) throw ConfigError("agent checkpoint config hash " + h + " != " + config_hash());
    AgentParams p;
    p.policy = nn::from_section(c.at("policy"));
    p.policy_target = nn::from_section(c.at("policy_target"));
    p.q1 = nn::from_section(c.at("q1"));
    p.q2 = nn::from_section(c.at("q2"));
    p.q1_target = nn::from_section(c.at("q1_target"));
    p.q2_target = nn::from_section(c.at("q2_target"));
    p.adam_policy = nn::adam_from_sections(c, kAdamPolicy);
    p.adam_q1 = nn::adam_from_sections(c, kAdamQ1);
    p.adam_q2 = nn::adam_from_sections(c, kAdamQ2);
    if (!p.policy.same_shape(p_.policy) || !p.q1.same_shape(p_.q1) || !p.q2.same_shape(p_.q2)) {
      throw FormatError("agent checkpoint shapes do not match the configuration");
    }
    p_ = std::move(p);
  }
  void load(const std::filesystem::path& path) { load(read_container(path)); }

 private:
  static inline const std::string kAdamPolicy = "adam.policy";
  static inline const std::string kAdamQ1 = "adam.q1";
  static inline const std::string kAdamQ2 = "adam.q2";

  struct Sampled {
    nn::Matrix a;
    nn::Matrix stddev;
    nn::Vector log_prob;
  };

  // Keeps actions strictly inside (-1, 1) even where tanh rounds to +-1.
  static double squash(double u) {
    constexpr double kEdge = 1.0 - 0x1.0p-52;
    return std::clamp(std::tanh(u), -kEdge, kEdge);
  }

  Sampled sample_from(const nn::Matrix& out, const nn::Matrix& eps) const {
    const int A = cfg_.action_dim;
    const Eigen::Index n = out.cols();
    if (eps.rows() != A || eps.cols() != n) throw ShapeError("noise matrix has the wrong shape");
    Sampled s{nn::Matrix(A, n), nn::Matrix(A, n), nn::Vector::Zero(n)};
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    for (Eigen::Index i = 0; i < n; ++i) {
      double lp = 0.0;
      for (int j = 0; j < A; ++j) {
        const double ls = std::clamp(out(A + j, i), kLogStdMin, kLogStdMax);
        const double sd = std::exp(ls);
        const double e = eps(j, i);
        const double a = squash(out(j, i) + sd * e);
        s.a(j, i) = a;
        s.stddev(j, i) = sd;
        lp += -0.5 * e * e - ls - half_log_2pi - std::log(1.0 - a * a + kSquashGuard);
      }
      s.log_prob(i) = lp;
    }
    return s;
  }

  static nn::Matrix stack(const nn::Matrix& top, const nn::Matrix& bottom) {
    nn::Matrix m(top.rows() + bottom.rows(), top.cols());
    m << top, bottom;
    return m;
  }

  void check_state(std::span<const double> state) const {
    if (static_cast<int>(state.size()) != cfg_.state_dim) {
      throw ShapeError("state has dimension " + std::to_string(state.size()) + ", expected " +
                       std::to_string(cfg_.state_dim));
    }
    for (double v : state) {
      if (!std::isfinite(v)) throw NumericDomainError("state contains non-finite values");
    }
  }

  void check_batch(const Batch& b) const {
    if (b.size() == 0) throw InvalidArgument("empty batch");
    if (b.states.rows() != cfg_.state_dim || b.next_states.rows() != cfg_.state_dim ||
        b.actions.rows() != cfg_.action_dim) {
      throw ShapeError("batch dimensions do not match the agent");
    }
  }

  AgentConfig cfg_;
  AgentParams p_;
};

}  // namespace e2nas
