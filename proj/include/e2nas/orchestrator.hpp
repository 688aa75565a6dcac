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

// Search loop. Each iteration resets the evaluator weights and rolls out one
// trajectory, stochastic while exploring and deterministic while exploiting.
// Agent updates follow environment steps once the replay buffer holds
// min_buffer_fill transitions.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "e2nas/binary_io.hpp"
#include "e2nas/config.hpp"
#include "e2nas/errors.hpp"
#include "e2nas/external_evaluator.hpp"
#include "e2nas/genotype.hpp"
#include "e2nas/mdp_env.hpp"
#include "e2nas/replay_buffer.hpp"
#include "e2nas/sac_agent.hpp"
#include "e2nas/surrogate.hpp"

namespace e2nas {

enum class Phase { explore = 0, exploit = 1, random = 2 };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::explore: return "explore";
    case Phase::exploit: return "exploit";
    case Phase::random: return "random";
  }
  return "?";
}

inline Phase parse_phase(std::string_view s) {
  if (s == "explore") return Phase::explore;
  if (s == "exploit") return Phase::exploit;
  if (s == "random") return Phase::random;
  throw ParseError("phase", "unknown phase '" + std::string(s) + "'");
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct IterationRecord {
  int iter = 0;
  Phase phase = Phase::explore;
  std::int64_t genotype_index = -1;  // -1: iteration aborted
  double is_score = kNaN;
  double fid_score = kNaN;
  double ret = kNaN;
  double best_return = -std::numeric_limits<double>::infinity();
  int updates = 0;  // agent updates performed during this iteration

  bool aborted() const noexcept { return genotype_index < 0; }
};

inline bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

inline bool operator==(const IterationRecord& a, const IterationRecord& b) {
  return a.iter == b.iter && a.phase == b.phase && a.genotype_index == b.genotype_index &&
         same_bits(a.is_score, b.is_score) && same_bits(a.fid_score, b.fid_score) &&
         same_bits(a.ret, b.ret) && same_bits(a.best_return, b.best_return) && a.updates == b.updates;
}

struct TopEntry {
  std::uint64_t genotype_index = 0;
  Genotype genotype;
  double search_return = 0.0;  // return observed during the search
  double is_score = kNaN;      // from the final re-evaluation
  double fid_score = kNaN;
  double objective = kNaN;     // IS - alpha * FID of the re-evaluation

  friend bool operator==(const TopEntry& a, const TopEntry& b) {
    return a.genotype_index == b.genotype_index && a.genotype == b.genotype &&
           same_bits(a.search_return, b.search_return) && same_bits(a.is_score, b.is_score) &&
           same_bits(a.fid_score, b.fid_score) && same_bits(a.objective, b.objective);
  }
};

struct SearchCounters {
  std::int64_t evaluations = 0;    // evaluate() calls spent by the search itself
  std::int64_t reevaluations = 0;  // evaluate() calls of the final top-k pass
  std::int64_t updates = 0;
  std::int64_t aborted_iterations = 0;
  std::int64_t first_update_iteration = -1;

  friend bool operator==(const SearchCounters&, const SearchCounters&) = default;
};

struct SearchReport {
  std::vector<IterationRecord> records;
  std::vector<TopEntry> topk;
  SearchCounters counters;
  std::string config_hash;
  double wall_clock_s = 0.0;
  bool complete = false;

  double best_return() const {
    return records.empty() ? -std::numeric_limits<double>::infinity() : records.back().best_return;
  }

  // Equality of everything except wall-clock time.
  bool same_results(const SearchReport& o) const {
    return records == o.records && topk == o.topk && counters == o.counters &&
           config_hash == o.config_hash && complete == o.complete;
  }
};

// Per-step instrumentation.
struct StepEvent {
  int iter = 0;
  int step = 0;
  Phase phase = Phase::explore;
  std::size_t buffer_len = 0;  // after pushing this step's transition
  int updates = 0;             // agent updates performed after this step
};

struct RunControl {
  // Stop (with checkpoints written) once this many iterations have completed
  // in total; negative runs to the end.
  int stop_after = -1;
  std::function<void(const StepEvent&)> on_step;
};

// --- output files -----------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kReportHeader = "iter,phase,genotype_index,is,fid,return,best_return";

inline void write_report_csv(std::ostream& out, const SearchReport& r) {
  out << kReportHeader << '\n';
  for (const auto& rec : r.records) {
    out << rec.iter << ',' << to_string(rec.phase) << ',' << rec.genotype_index << ','
        << format_double(rec.is_score) << ',' << format_double(rec.fid_score) << ','
        << format_double(rec.ret) << ',' << format_double(rec.best_return) << '\n';
  }
}

inline std::vector<IterationRecord> read_report_csv(std::istream& in, const std::string& name = "report") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, "empty report");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) throw ParseError(name + ".header", "unexpected header '" + line + "'");
  std::vector<IterationRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    const std::string where = name + ":" + std::to_string(lineno);
    if (f.size() != 7) throw ParseError(where, "expected 7 fields");
    IterationRecord r;
    try {
      std::size_t used = 0;
      r.iter = std::stoi(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("iter");
      r.phase = parse_phase(f[1]);
      r.genotype_index = std::stoll(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("genotype_index");
      r.is_score = std::stod(f[3]);
      r.fid_score = std::stod(f[4]);
      r.ret = std::stod(f[5]);
      r.best_return = std::stod(f[6]);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(where, std::string("bad field: ") + e.what());
    }
    out.push_back(r);
  }
  return out;
}

inline void write_topk(std::ostream& out, const SearchReport& r) {
  for (std::size_t k = 0; k < r.topk.size(); ++k) {
    const TopEntry& t = r.topk[k];
    out << "# top" << (k + 1) << " index=" << t.genotype_index
        << " search_return=" << format_double(t.search_return)
        << " objective=" << format_double(t.objective) << " is=" << format_double(t.is_score)
        << " fid=" << format_double(t.fid_score) << '\n'
        << serialize(t.genotype) << '\n';
  }
}

namespace detail {

template <typename Fn>
void write_text_file(const std::filesystem::path& path, Fn&& fn) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    fn(f);
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace detail

inline void write_outputs(const std::filesystem::path& dir, const SearchReport& r) {
  detail::write_text_file(dir / "report.csv", [&](std::ostream& o) { write_report_csv(o, r); });
  detail::write_text_file(dir / "topk.txt", [&](std::ostream& o) { write_topk(o, r); });
}

inline void write_config_snapshot(const std::filesystem::path& dir, const SearchConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  detail::write_text_file(dir / "config.snapshot", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// --- evaluator factory --------------------------------------------------------

inline std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& cfg) {
  if (cfg.evaluator == "surrogate") {
    SurrogateSpec spec = cfg.surrogate;
    spec.max_cells = cfg.max_cells;
    return std::make_unique<SurrogateEvaluator>(spec);
  }
  if (cfg.evaluator.rfind("external:", 0) == 0) {
    ExternalOptions opts;
    opts.evaluate_timeout_s = cfg.evaluate_timeout_s;
    return std::make_unique<ExternalEvaluator>(cfg.evaluator.substr(9), opts);
  }
  throw ConfigError("unknown evaluator '" + cfg.evaluator + "'");
}

// --- shared pieces -------------------------------------------------------------

namespace detail {

// Best `k` distinct genotypes by search return, each re-trained once from
// fresh weights to record its final scores.
inline std::vector<TopEntry> reevaluate_topk(const std::map<std::uint64_t, double>& seen,
                                             const SearchConfig& cfg, Evaluator& evaluator,
                                             SearchEnv& env, SearchCounters& counters) {
  std::vector<std::pair<std::uint64_t, double>> all(seen.begin(), seen.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<TopEntry> out;
  for (std::size_t k = 0; k < all.size() && k < static_cast<std::size_t>(cfg.top_k); ++k) {
    TopEntry t;
    t.genotype_index = all[k].first;
    t.genotype = genotype_from_index(all[k].first, cfg.max_cells);
    t.search_return = all[k].second;
    try {
      evaluator.reset_weights();
      env.reset();
      for (const auto& cell : t.genotype.cells) {
        ++counters.reevaluations;
        env.step(encode_center(cell));
      }
      t.is_score = env.state().is_score;
      t.fid_score = env.state().fid_score;
      t.objective = t.is_score - cfg.alpha * t.fid_score;
    } catch (const EvaluationError& e) {
      if (e.connection_lost()) throw;
    } catch (const RemoteError&) {
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline void record_seen(std::map<std::uint64_t, double>& seen, std::uint64_t idx, double ret) {
  auto [it, inserted] = seen.try_emplace(idx, ret);
  if (!inserted) it->second = std::max(it->second, ret);
}

}  // namespace detail

// --- search -----------------------------------------------------------------

class SearchRun {
 public:
  SearchRun(SearchConfig cfg, Evaluator& evaluator)
      : cfg_(std::move(cfg)),
        evaluator_(&evaluator),
        env_(evaluator, EnvConfig{cfg_.max_cells, cfg_.epochs_per_step, RewardConfig{cfg_.alpha}}),
        agent_(agent_config(cfg_, evaluator), hash_words(cfg_.seed, {kStreamAgent})),
        buffer_(cfg_.buffer_capacity),
        act_rng_(hash_words(cfg_.seed, {kStreamAct})),
        update_rng_(hash_words(cfg_.seed, {kStreamUpdate})) {
    validate(cfg_);
    report_.config_hash = config_hash(cfg_);
  }

  const SearchConfig& config() const noexcept { return cfg_; }
  const SacAgent& agent() const noexcept { return agent_; }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  const SearchReport& report() const noexcept { return report_; }
  int next_iteration() const noexcept { return next_iter_; }

  Phase phase_of(int iter) const {
    return iter < cfg_.exploration_iterations() ? Phase::explore : Phase::exploit;
  }

  SearchReport run(const RunControl& ctl = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (!cfg_.output_dir.empty()) {
        std::filesystem::create_directories(cfg_.output_dir);
        write_config_snapshot(cfg_.output_dir, cfg_);
      }
      while (next_iter_ < cfg_.total_iterations) {
        if (ctl.stop_after >= 0 && next_iter_ >= ctl.stop_after) break;
        run_iteration(ctl);
        if (!cfg_.output_dir.empty() && cfg_.checkpoint_every > 0 &&
            next_iter_ % cfg_.checkpoint_every == 0 && next_iter_ < cfg_.total_iterations) {
          save_checkpoint();
        }
      }
      if (next_iter_ >= cfg_.total_iterations && !report_.complete) {
        report_.topk = detail::reevaluate_topk(seen_, cfg_, *evaluator_, env_, report_.counters);
        report_.complete = true;
      }
    } catch (...) {
      report_.wall_clock_s += elapsed(t0);
      save_partial();
      throw;
    }
    report_.wall_clock_s += elapsed(t0);
    if (!cfg_.output_dir.empty()) {
      save_checkpoint();
      write_outputs(cfg_.output_dir, report_);
    }
    return report_;
  }

  // Restores a run from the checkpoints in cfg.output_dir.
  void restore() {
    const auto& dir = cfg_.output_dir;
    const std::string want = config_hash(cfg_);
    std::ifstream snap(dir / "config.snapshot");
    if (!snap) throw IoError("no config.snapshot in " + dir.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(snap);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("config.snapshot: ") + e.what());
    }
    const std::string have = j.value("config_hash", "");
    if (have != want) {
      throw ConfigError("config mismatch: checkpoint was written with config hash " + have +
                        ", current config hashes to " + want);
    }
    const Container c = read_container(dir / "agent.ckpt");
    agent_.load(c);
    buffer_ = ReplayBuffer::load(dir / "buffer.ckpt");
    restore_run_state(c);
  }

 private:
  static constexpr std::uint64_t kStreamAgent = 3;
  static constexpr std::uint64_t kStreamAct = 1;
  static constexpr std::uint64_t kStreamUpdate = 2;

  static AgentConfig agent_config(const SearchConfig& cfg, const Evaluator& ev) {
    AgentConfig a = cfg.agent;
    a.state_dim = 3 + ev.descriptor().psr_dim;
    return a;
  }

  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void run_iteration(const RunControl& ctl) {
    const int iter = next_iter_;
    const Phase phase = phase_of(iter);
    IterationRecord rec;
    rec.iter = iter;
    rec.phase = phase;
    rec.best_return = report_.records.empty() ? rec.best_return : report_.records.back().best_return;

    bool aborted = false;
    double ret = 0.0;
    try {
      try {
        evaluator_->reset_weights();
      } catch (const Error& e) {
        const bool lost = dynamic_cast<const ConnectionLost*>(&e) != nullptr;
        throw EvaluationError(Genotype{{}, cfg_.max_cells}, std::current_exception(), e.what(), lost);
      }
      SearchState s = env_.reset();
      for (int step = 0; step < cfg_.max_cells; ++step) {
        const auto sv = state_vector(s, cfg_.max_cells, cfg_.scales);
        const ActionMode mode = phase == Phase::explore ? ActionMode::stochastic : ActionMode::deterministic;
        const ActionVector a = agent_.sample_action(sv, mode, act_rng_).action;
        ++report_.counters.evaluations;
        StepResult r = env_.step(a);
        ret += r.reward;
        buffer_.push(Transition{s, a, r.reward, r.next_state, r.done});
        const int n = updates_after_step(phase);
        for (int u = 0; u < n; ++u) agent_update();
        if (n > 0 && report_.counters.first_update_iteration < 0) {
          report_.counters.first_update_iteration = iter;
        }
        rec.updates += n;
        if (ctl.on_step) ctl.on_step(StepEvent{iter, step, phase, buffer_.len(), n});
        s = std::move(r.next_state);
      }
    } catch (const EvaluationError& e) {
      if (e.connection_lost()) throw;
      aborted = true;
      std::fprintf(stderr, "{\"event\":\"iteration_aborted\",\"iter\":%d,\"message\":%s}\n", iter,
                   nlohmann::json(e.what()).dump().c_str());
    }

    if (aborted) {
      ++report_.counters.aborted_iterations;
    } else {
      const auto idx = genotype_index(env_.prefix());
      rec.genotype_index = static_cast<std::int64_t>(idx);
      rec.is_score = env_.state().is_score;
      rec.fid_score = env_.state().fid_score;
      rec.ret = ret;
      rec.best_return = std::max(rec.best_return, ret);
      detail::record_seen(seen_, idx, ret);
    }
    report_.records.push_back(rec);
    ++next_iter_;
  }

  int updates_after_step(Phase phase) const {
    if (buffer_.len() < static_cast<std::size_t>(cfg_.min_buffer_fill)) return 0;
    return phase == Phase::explore ? cfg_.updates_per_explore_step : cfg_.updates_per_exploit_step;
  }

  void agent_update() {
    const auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.agent.batch_size), update_rng_);
    agent_.update(make_batch(batch, cfg_.max_cells, cfg_.scales), update_rng_);
    ++report_.counters.updates;
  }

  // --- checkpoints ------------------------------------------------------------

  void save_checkpoint() {
    Container c = agent_.to_container();
    Section run;
    run.name = "run";
    run.header = {{"next_iter", next_iter_},
                  {"act_rng", act_rng_.state()},
                  {"update_rng", update_rng_.state()},
                  {"evaluations", report_.counters.evaluations},
                  {"updates", report_.counters.updates},
                  {"aborted_iterations", report_.counters.aborted_iterations},
                  {"first_update_iteration", report_.counters.first_update_iteration},
                  {"wall_clock_s", report_.wall_clock_s}};
    for (const auto& r : report_.records) {
      run.data.insert(run.data.end(), {static_cast<double>(r.iter), static_cast<double>(r.phase),
                                       static_cast<double>(r.genotype_index), r.is_score, r.fid_score,
                                       r.ret, r.best_return, static_cast<double>(r.updates)});
    }
    c.sections.push_back(std::move(run));
    Section seen;
    seen.name = "seen";
    for (const auto& [idx, ret] : seen_) {
      seen.data.push_back(static_cast<double>(idx));
      seen.data.push_back(ret);
    }
    c.sections.push_back(std::move(seen));
    if (report_.complete) {
      Section top;
      top.name = "topk";
      top.header = {{"reevaluations", report_.counters.reevaluations}};
      for (const auto& t : report_.topk) {
        top.data.insert(top.data.end(), {static_cast<double>(t.genotype_index), t.search_return,
                                         t.is_score, t.fid_score, t.objective});
      }
      c.sections.push_back(std::move(top));
    }
    write_container(cfg_.output_dir / "agent.ckpt", c);
    buffer_.save(cfg_.output_dir / "buffer.ckpt");
  }

  void restore_run_state(const Container& c) {
    const Section& run = c.at("run");
    try {
      next_iter_ = run.header.at("next_iter").get<int>();
      act_rng_ = Rng::from_state(run.header.at("act_rng").get<Rng::State>());
      update_rng_ = Rng::from_state(run.header.at("update_rng").get<Rng::State>());
      report_.counters.evaluations = run.header.at("evaluations").get<std::int64_t>();
      report_.counters.updates = run.header.at("updates").get<std::int64_t>();
      report_.counters.aborted_iterations = run.header.at("aborted_iterations").get<std::int64_t>();
      report_.counters.first_update_iteration = run.header.at("first_update_iteration").get<std::int64_t>();
      report_.wall_clock_s = run.header.at("wall_clock_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("run state: ") + e.what());
    }
    constexpr std::size_t kWidth = 8;
    if (run.data.size() != static_cast<std::size_t>(next_iter_) * kWidth) {
      throw FormatError("run state record count does not match next_iter");
    }
    report_.records.clear();
    for (std::size_t i = 0; i < run.data.size(); i += kWidth) {
      IterationRecord r;
      r.iter = static_cast<int>(run.data[i]);
      r.phase = static_cast<Phase>(static_cast<int>(run.data[i + 1]));
      r.genotype_index = static_cast<std::int64_t>(run.data[i + 2]);
      r.is_score = run.data[i + 3];
      r.fid_score = run.data[i + 4];
      r.ret = run.data[i + 5];
      r.best_return = run.data[i + 6];
      r.updates = static_cast<int>(run.data[i + 7]);
      report_.records.push_back(r);
    }
    const Section& seen = c.at("seen");
    if (seen.data.size() % 2 != 0) throw FormatError("seen section is malformed");
    seen_.clear();
    for (std::size_t i = 0; i < seen.data.size(); i += 2) {
      seen_[static_cast<std::uint64_t>(seen.data[i])] = seen.data[i + 1];
    }
    report_.topk.clear();
    report_.complete = false;
    if (c.contains("topk")) {
      const Section& top = c.at("topk");
      if (top.data.size() % 5 != 0) throw FormatError("topk section is malformed");
      for (std::size_t i = 0; i < top.data.size(); i += 5) {
        TopEntry t;
        t.genotype_index = static_cast<std::uint64_t>(top.data[i]);
        t.genotype = genotype_from_index(t.genotype_index, cfg_.max_cells);
        t.search_return = top.data[i + 1];
        t.is_score = top.data[i + 2];
        t.fid_score = top.data[i + 3];
        t.objective = top.data[i + 4];
        report_.topk.push_back(std::move(t));
      }
      report_.counters.reevaluations = top.header.value("reevaluations", std::int64_t{0});
      report_.complete = true;
    }
  }

  void save_partial() noexcept {
    if (cfg_.output_dir.empty()) return;
    try {
      write_outputs(cfg_.output_dir, report_);
      save_checkpoint();
    } catch (...) {
    }
  }

  SearchConfig cfg_;
  Evaluator* evaluator_;
  SearchEnv env_;
  SacAgent agent_;
  ReplayBuffer buffer_;
  Rng act_rng_;
  Rng update_rng_;
  int next_iter_ = 0;
  std::map<std::uint64_t, double> seen_;
  SearchReport report_;
};

inline SearchReport run_search(const SearchConfig& cfg, Evaluator& evaluator, const RunControl& ctl = {}) {
  SearchRun run(cfg, evaluator);
  return run.run(ctl);
}

// Continues the run checkpointed in cfg.output_dir. The config must hash to
// the snapshot's value.
inline SearchReport resume(const SearchConfig& cfg, Evaluator& evaluator, const RunControl& ctl = {}) {
  if (cfg.output_dir.empty()) throw ConfigError("resume needs an output directory");
  SearchRun run(cfg, evaluator);
  run.restore();
  return run.run(ctl);
}

// Uniform random search with the same evaluation accounting and report format.
inline SearchReport run_random_baseline(const SearchConfig& cfg, Evaluator& evaluator) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  SearchEnv env(evaluator, EnvConfig{cfg.max_cells, cfg.epochs_per_step, RewardConfig{cfg.alpha}});
  Rng rng(hash_words(cfg.seed, {4}));
  const std::uint64_t n = space_size(cfg.max_cells);
  SearchReport report;
  report.config_hash = config_hash(cfg);
  std::map<std::uint64_t, double> seen;
  double best = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.total_iterations; ++iter) {
    const std::uint64_t idx = rng.uniform_below(n);
    const Genotype g = genotype_from_index(idx, cfg.max_cells);
    IterationRecord rec;
    rec.iter = iter;
    rec.phase = Phase::random;
    try {
      evaluator.reset_weights();
      env.reset();
      double ret = 0.0;
      for (const auto& cell : g.cells) {
        ++report.counters.evaluations;
        ret += env.step(encode_center(cell)).reward;
      }
      rec.genotype_index = static_cast<std::int64_t>(idx);
      rec.is_score = env.state().is_score;
      rec.fid_score = env.state().fid_score;
      rec.ret = ret;
      best = std::max(best, ret);
      detail::record_seen(seen, idx, ret);
    } catch (const EvaluationError& e) {
      if (e.connection_lost()) throw;
      ++report.counters.aborted_iterations;
    } catch (const RemoteError&) {
      ++report.counters.aborted_iterations;
    }
    rec.best_return = best;
    report.records.push_back(rec);
  }

  report.topk = detail::reevaluate_topk(seen, cfg, evaluator, env, report.counters);
  report.complete = true;
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_config_snapshot(cfg.output_dir, cfg);
    write_outputs(cfg.output_dir, report);
  }
  return report;
}

}  // namespace e2nas
