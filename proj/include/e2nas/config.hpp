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

// Search configuration and its JSON file form:
//
//   {"search":    {<SearchConfig fields>},
//    "agent":     {<AgentConfig fields>},
//    "surrogate": {<SurrogateSpec fields>}}
//
// Every section and key is optional; unknown ones are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "e2nas/errors.hpp"
#include "e2nas/mdp_env.hpp"
#include "e2nas/sac_agent.hpp"
#include "e2nas/surrogate.hpp"

namespace e2nas {

struct SearchConfig {
  int total_iterations = 1000;
  double explore_fraction = 0.7;
  int updates_per_explore_step = 1;
  int updates_per_exploit_step = 10;
  int min_buffer_fill = 256;
  std::uint64_t seed = 0;
  double alpha = 0.01;
  int max_cells = kDefaultMaxCells;
  int epochs_per_step = 1;
  int top_k = 3;
  std::size_t buffer_capacity = 100'000;
  int checkpoint_every = 100;  // iterations between checkpoints; 0 = end only
  StateScales scales;
  std::string evaluator = "surrogate";  // or "external:<endpoint>"
  double evaluate_timeout_s = 600.0;
  AgentConfig agent;                    // state_dim is derived from the evaluator
  SurrogateSpec surrogate;
  std::filesystem::path output_dir;     // empty: nothing is written

  int exploration_iterations() const {
    return static_cast<int>(std::llround(explore_fraction * total_iterations));
  }
};

inline void validate(const SearchConfig& c) {
  if (c.total_iterations < 1) throw ConfigError("total_iterations must be >= 1");
  if (!(c.explore_fraction > 0.0 && c.explore_fraction < 1.0)) {
    throw ConfigError("explore_fraction must lie in (0, 1)");
  }
  if (c.updates_per_explore_step < 0 || c.updates_per_exploit_step < 0) {
    throw ConfigError("update counts must be >= 0");
  }
  if (c.min_buffer_fill < c.agent.batch_size) throw ConfigError("min_buffer_fill must be >= batch_size");
  if (!std::isfinite(c.alpha) || c.alpha < 0.0) throw ConfigError("alpha must be finite and >= 0");
  if (c.max_cells < 1 || c.max_cells > action_layout::kMaxSkips + 1) throw ConfigError("max_cells out of range");
  if (c.epochs_per_step < 1) throw ConfigError("epochs_per_step must be >= 1");
  if (c.top_k < 0) throw ConfigError("top_k must be >= 0");
  if (c.buffer_capacity < static_cast<std::size_t>(c.agent.batch_size)) {
    throw ConfigError("buffer_capacity must be >= batch_size");
  }
  if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(c.scales.is_scale > 0.0) || !(c.scales.fid_scale > 0.0)) throw ConfigError("scales must be > 0");
  if (c.evaluator != "surrogate" && c.evaluator.rfind("external:", 0) != 0) {
    throw ConfigError("evaluator must be 'surrogate' or 'external:<endpoint>'");
  }
  if (!(c.evaluate_timeout_s > 0.0)) throw ConfigError("evaluate_timeout_s must be > 0");
  try {
    AgentConfig a = c.agent;
    a.state_dim = std::max(a.state_dim, 1);
    validate(a);
    SurrogateSpec s = c.surrogate;
    s.max_cells = c.max_cells;
    validate(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

// Resolved configuration as JSON (output_dir excluded).
inline nlohmann::json to_json(const SearchConfig& c) {
  nlohmann::json agent = to_json(c.agent);
  agent.erase("state_dim");
  agent.erase("action_dim");
  return {
      {"search",
       {{"total_iterations", c.total_iterations},
        {"explore_fraction", c.explore_fraction},
        {"updates_per_explore_step", c.updates_per_explore_step},
        {"updates_per_exploit_step", c.updates_per_exploit_step},
        {"min_buffer_fill", c.min_buffer_fill},
        {"seed", c.seed},
        {"alpha", c.alpha},
        {"max_cells", c.max_cells},
        {"epochs_per_step", c.epochs_per_step},
        {"top_k", c.top_k},
        {"buffer_capacity", c.buffer_capacity},
        {"checkpoint_every", c.checkpoint_every},
        {"is_scale", c.scales.is_scale},
        {"fid_scale", c.scales.fid_scale},
        {"evaluator", c.evaluator},
        {"evaluate_timeout_s", c.evaluate_timeout_s}}},
      {"agent", agent},
      {"surrogate",
       {{"seed", c.surrogate.seed},
        {"psr_dim", c.surrogate.psr_dim},
        {"is_base", c.surrogate.is_base},
        {"is_span", c.surrogate.is_span},
        {"fid_base", c.surrogate.fid_base},
        {"fid_span", c.surrogate.fid_span},
        {"noise_std", c.surrogate.noise_std}}}};
}

// Stable under key reordering: nlohmann objects serialize with sorted keys.
// checkpoint_every only controls how often state is saved, so it is left out.
inline std::string config_hash(const SearchConfig& c) {
  nlohmann::json j = to_json(c);
  j["search"].erase("checkpoint_every");
  return hash_hex(j);
}

namespace detail {

template <typename T>
void read_key(const nlohmann::json& sec, const std::string& section, const char* key, T& out) {
  if (!sec.contains(key)) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!sec[key].is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!sec[key].is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (sec[key].get<std::int64_t>() < 0 && !sec[key].is_number_unsigned()) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!sec[key].is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!sec[key].is_string()) throw ConfigError("");
    }
    out = sec[key].get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key " + section + "." + key + " has the wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& sec, const std::string& section,
                           const std::set<std::string>& known) {
  if (!sec.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [k, v] : sec.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key " + section + "." + k);
  }
}

}  // namespace detail

inline SearchConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k != "search" && k != "agent" && k != "surrogate") throw ConfigError("unknown config section '" + k + "'");
  }
  SearchConfig c;
  const nlohmann::json empty = nlohmann::json::object();
  const auto& s = j.contains("search") ? j["search"] : empty;
  detail::reject_unknown(s, "search",
                         {"total_iterations", "explore_fraction", "updates_per_explore_step",
                          "updates_per_exploit_step", "min_buffer_fill", "seed", "alpha", "max_cells",
                          "epochs_per_step", "top_k", "buffer_capacity", "checkpoint_every", "is_scale",
                          "fid_scale", "evaluator", "evaluate_timeout_s"});
  detail::read_key(s, "search", "total_iterations", c.total_iterations);
  detail::read_key(s, "search", "explore_fraction", c.explore_fraction);
  detail::read_key(s, "search", "updates_per_explore_step", c.updates_per_explore_step);
  detail::read_key(s, "search", "updates_per_exploit_step", c.updates_per_exploit_step);
  detail::read_key(s, "search", "min_buffer_fill", c.min_buffer_fill);
  detail::read_key(s, "search", "seed", c.seed);
  detail::read_key(s, "search", "alpha", c.alpha);
  detail::read_key(s, "search", "max_cells", c.max_cells);
  detail::read_key(s, "search", "epochs_per_step", c.epochs_per_step);
  detail::read_key(s, "search", "top_k", c.top_k);
  detail::read_key(s, "search", "buffer_capacity", c.buffer_capacity);
  detail::read_key(s, "search", "checkpoint_every", c.checkpoint_every);
  detail::read_key(s, "search", "is_scale", c.scales.is_scale);
  detail::read_key(s, "search", "fid_scale", c.scales.fid_scale);
  detail::read_key(s, "search", "evaluator", c.evaluator);
  detail::read_key(s, "search", "evaluate_timeout_s", c.evaluate_timeout_s);

  const auto& a = j.contains("agent") ? j["agent"] : empty;
  detail::reject_unknown(a, "agent",
                         {"beta", "gamma", "tau", "lr_policy", "lr_critic", "batch_size", "hidden_dims",
                          "twin_q", "use_target_policy"});
  detail::read_key(a, "agent", "beta", c.agent.beta);
  detail::read_key(a, "agent", "gamma", c.agent.gamma);
  detail::read_key(a, "agent", "tau", c.agent.tau);
  detail::read_key(a, "agent", "lr_policy", c.agent.lr_policy);
  detail::read_key(a, "agent", "lr_critic", c.agent.lr_critic);
  detail::read_key(a, "agent", "batch_size", c.agent.batch_size);
  if (a.contains("hidden_dims")) {
    if (!a["hidden_dims"].is_array()) throw ConfigError("config key agent.hidden_dims must be an array");
    c.agent.hidden_dims.clear();
    for (const auto& h : a["hidden_dims"]) {
      if (!h.is_number_integer()) throw ConfigError("config key agent.hidden_dims must hold integers");
      c.agent.hidden_dims.push_back(h.get<int>());
    }
  }
  detail::read_key(a, "agent", "twin_q", c.agent.twin_q);
  detail::read_key(a, "agent", "use_target_policy", c.agent.use_target_policy);

  const auto& g = j.contains("surrogate") ? j["surrogate"] : empty;
  detail::reject_unknown(g, "surrogate",
                         {"seed", "psr_dim", "is_base", "is_span", "fid_base", "fid_span", "noise_std"});
  detail::read_key(g, "surrogate", "seed", c.surrogate.seed);
  detail::read_key(g, "surrogate", "psr_dim", c.surrogate.psr_dim);
  detail::read_key(g, "surrogate", "is_base", c.surrogate.is_base);
  detail::read_key(g, "surrogate", "is_span", c.surrogate.is_span);
  detail::read_key(g, "surrogate", "fid_base", c.surrogate.fid_base);
  detail::read_key(g, "surrogate", "fid_span", c.surrogate.fid_span);
  detail::read_key(g, "surrogate", "noise_std", c.surrogate.noise_std);
  c.surrogate.max_cells = c.max_cells;

  validate(c);
  return c;
}

inline SearchConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace e2nas
