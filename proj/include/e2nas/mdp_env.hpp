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

// The search MDP. A state is the scored genotype prefix and an action designs
// the next cell; the reward is the score improvement that cell brings.

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include "e2nas/errors.hpp"
#include "e2nas/evaluator.hpp"
#include "e2nas/genotype.hpp"

namespace e2nas {

struct SearchState {
  int depth = 0;
  double is_score = 0.0;
  double fid_score = 0.0;
  std::vector<double> psr;

  friend bool operator==(const SearchState&, const SearchState&) = default;
};

struct Transition {
  SearchState state;
  ActionVector action{};
  double reward = 0.0;
  SearchState next_state;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct RewardConfig {
  double alpha = 0.01;  // FID weight; 0 is the IS-only reward
};

// Scales applied when flattening a state for the agent's networks.
struct StateScales {
  double is_scale = 10.0;
  double fid_scale = 100.0;
};

inline SearchState initial_state(int psr_dim) {
  return SearchState{0, 0.0, 0.0, std::vector<double>(static_cast<std::size_t>(psr_dim), 0.0)};
}

// [depth/max_cells, is/is_scale, fid/fid_scale, psr...]
inline std::vector<double> state_vector(const SearchState& s, int max_cells,
                                        const StateScales& scales = {}) {
  std::vector<double> v;
  v.reserve(3 + s.psr.size());
  v.push_back(static_cast<double>(s.depth) / max_cells);
  v.push_back(s.is_score / scales.is_scale);
  v.push_back(s.fid_score / scales.fid_scale);
  v.insert(v.end(), s.psr.begin(), s.psr.end());
  return v;
}

inline double reward(double prev_is, double prev_fid, double is, double fid,
                     const RewardConfig& cfg) {
  if (!std::isfinite(prev_is) || !std::isfinite(prev_fid) || !std::isfinite(is) ||
      !std::isfinite(fid) || !std::isfinite(cfg.alpha)) {
    throw NumericDomainError("reward inputs must be finite");
  }
  return (is - prev_is) + cfg.alpha * (prev_fid - fid);
}

// Raised when the evaluator fails inside step(); carries the prefix that was
// being trained and the original exception.
class EvaluationError : public EvaluatorError {
 public:
  EvaluationError(Genotype prefix, std::exception_ptr cause, const std::string& what,
                  bool connection_lost)
      : EvaluatorError("evaluation failed for prefix [" + prefix_summary(prefix) + "]: " + what),
        prefix_(std::move(prefix)),
        cause_(std::move(cause)),
        connection_lost_(connection_lost) {}

  const Genotype& prefix() const noexcept { return prefix_; }
  std::exception_ptr cause() const noexcept { return cause_; }
  // The evaluator can no longer be used (transport gone or poisoned).
  bool connection_lost() const noexcept { return connection_lost_; }

 private:
  static std::string prefix_summary(const Genotype& g) {
    std::string s = serialize(g);
    std::replace(s.begin(), s.end(), '\n', ';');
    return s;
  }
  Genotype prefix_;
  std::exception_ptr cause_;
  bool connection_lost_;
};

struct EnvConfig {
  int max_cells = kDefaultMaxCells;
  int epochs_per_step = 1;
  RewardConfig reward;
};

struct StepResult {
  SearchState next_state;
  double reward = 0.0;
  bool done = false;
};

class SearchEnv {
 public:
  SearchEnv(Evaluator& evaluator, EnvConfig cfg)
      : evaluator_(&evaluator), cfg_(cfg), psr_dim_(evaluator.descriptor().psr_dim) {
    if (cfg_.max_cells < 1 || cfg_.max_cells > action_layout::kMaxSkips + 1) {
      throw InvalidArgument("max_cells out of range");
    }
    if (cfg_.epochs_per_step < 1) throw InvalidArgument("epochs_per_step must be positive");
    reset();
  }

  // Initial state: empty genotype, zero scores, zero psr. Does not touch the
  // evaluator's weights; callers pair this with Evaluator::reset_weights().
  SearchState reset() {
    prefix_ = Genotype{{}, cfg_.max_cells};
    state_ = initial_state(psr_dim_);
    aborted_ = false;
    return state_;
  }

  StepResult step(const ActionVector& a) {
    if (aborted_) throw InvalidStateError("episode aborted; reset() first");
    if (state_.depth >= cfg_.max_cells) throw InvalidStateError("step after episode end");

    Genotype next = prefix_;
    next.cells.push_back(decode_action(a, state_.depth, cfg_.max_cells));

    EvalResult r;
    try {
      r = evaluator_->evaluate(next, cfg_.epochs_per_step);
      check_result(r, psr_dim_);
    } catch (const ConnectionLost& e) {
      aborted_ = true;
      throw EvaluationError(next, std::current_exception(), e.what(), true);
    } catch (const Error& e) {
      aborted_ = true;
      throw EvaluationError(next, std::current_exception(), e.what(), false);
    }

    StepResult out;
    out.reward = reward(state_.is_score, state_.fid_score, r.is_score, r.fid_score, cfg_.reward);
    out.next_state = SearchState{state_.depth + 1, r.is_score, r.fid_score, std::move(r.psr)};
    out.done = out.next_state.depth == cfg_.max_cells;
    prefix_ = std::move(next);
    state_ = out.next_state;
    return out;
  }

  const SearchState& state() const noexcept { return state_; }
  const Genotype& prefix() const noexcept { return prefix_; }
  bool done() const noexcept { return state_.depth == cfg_.max_cells; }
  int psr_dim() const noexcept { return psr_dim_; }
  const EnvConfig& config() const noexcept { return cfg_; }

 private:
  Evaluator* evaluator_;
  EnvConfig cfg_;
  int psr_dim_;
  Genotype prefix_;
  SearchState state_;
  bool aborted_ = false;
};

// Sum of rewards of a complete episode. Under the zero baseline at the
// initial state this telescopes to IS_final - alpha * FID_final.
inline double cumulative_return(std::span<const Transition> trajectory) {
  if (trajectory.empty()) throw ValidationError("empty trajectory");
  const SearchState& first = trajectory.front().state;
  const bool starts_at_origin =
      first.depth == 0 && first.is_score == 0.0 && first.fid_score == 0.0 &&
      std::all_of(first.psr.begin(), first.psr.end(), [](double v) { return v == 0.0; });
  if (!starts_at_origin) throw ValidationError("trajectory does not start at the initial state");
  double total = 0.0;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const Transition& tr = trajectory[t];
    if (tr.next_state.depth != tr.state.depth + 1) {
      throw ValidationError("transition " + std::to_string(t) + " does not add one cell");
    }
    const bool last = t + 1 == trajectory.size();
    if (tr.done != last) {
      throw ValidationError(last ? "trajectory is incomplete" : "done flag before episode end");
    }
    if (!last && !(trajectory[t + 1].state == tr.next_state)) {
      throw ValidationError("transitions " + std::to_string(t) + " and " +
                            std::to_string(t + 1) + " are not contiguous");
    }
    total += tr.reward;
  }
  return total;
}

}  // namespace e2nas
