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

// e2nas command-line tool.
//
//   e2nas search   --config cfg.json [--seed N]... [--out DIR] [--evaluator E] [--parallel] [--resume]
//   e2nas baseline --config cfg.json [--seed N]... [--out DIR] [--evaluator E] [--parallel]
//   e2nas oracle   --config cfg.json [--alpha A] [--out FILE]
//   e2nas curves   REPORT.csv... [--out FILE]
//   e2nas eval-stub [--psr-dim D] [--listen PORT]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 evaluator error.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "e2nas.hpp"

namespace fs = std::filesystem;
using namespace e2nas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitEvaluator = 2;

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

// Maps an in-flight exception onto an exit code, printing one JSON line.
int handle_exception() {
  try {
    throw;
  } catch (const EvaluatorError& e) {
    report_error("evaluator", e.what());
    return kExitEvaluator;
  } catch (const ConfigError& e) {
    report_error("config", e.what());
  } catch (const ParseError& e) {
    report_error("parse", e.what());
  } catch (const IoError& e) {
    report_error("io", e.what());
  } catch (const Error& e) {
    report_error("error", e.what());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
  }
  return kExitConfig;
}

fs::path default_out_root() {
  if (const char* env = std::getenv("E2NAS_OUT"); env && *env) return env;
  return "runs";
}

struct RunOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string evaluator;
  bool parallel = false;
  bool resume = false;
  int stop_after = -1;
};

void write_manifest(const fs::path& root, const std::string& command, const RunOptions& o,
                    const SearchConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  fs::create_directories(root);
  const nlohmann::json m{{"command", command},
                         {"config_path", o.config_path},
                         {"config_hash", config_hash(cfg)},
                         {"seeds", seeds},
                         {"output_root", root.string()}};
  std::ofstream f(root / "manifest.json");
  f << m.dump(2) << '\n';
  if (!f) throw IoError("cannot write manifest in " + root.string());
}

int run_one(const std::string& command, SearchConfig cfg, const RunOptions& o) {
  try {
    auto evaluator = make_evaluator(cfg);
    if (command == "baseline") {
      const SearchReport r = run_random_baseline(cfg, *evaluator);
      std::printf("seed %llu: best_return %s (%s)\n", static_cast<unsigned long long>(cfg.seed),
                  format_double(r.best_return()).c_str(), cfg.output_dir.c_str());
      return kExitOk;
    }
    RunControl ctl;
    ctl.stop_after = o.stop_after;
    const SearchReport r = o.resume ? resume(cfg, *evaluator, ctl) : run_search(cfg, *evaluator, ctl);
    std::printf("seed %llu: %s after %zu iterations, best_return %s (%s)\n",
                static_cast<unsigned long long>(cfg.seed), r.complete ? "complete" : "stopped",
                r.records.size(), format_double(r.best_return()).c_str(), cfg.output_dir.c_str());
    return kExitOk;
  } catch (...) {
    return handle_exception();
  }
}

int cmd_run(const std::string& command, const RunOptions& o) {
  SearchConfig base;
  std::vector<std::uint64_t> seeds;
  fs::path root;
  try {
    base = load_config(o.config_path);
    if (!o.evaluator.empty()) {
      base.evaluator = o.evaluator;
      validate(base);
    }
    seeds = o.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : o.seeds;
    root = o.out.empty() ? default_out_root() : fs::path(o.out);
    write_manifest(root, command, o, base, seeds);
  } catch (...) {
    return handle_exception();
  }

  auto config_for = [&](std::uint64_t seed) {
    SearchConfig c = base;
    c.seed = seed;
    c.output_dir = root / ("seed_" + std::to_string(seed));
    return c;
  };

  int worst = kExitOk;
  if (o.parallel && seeds.size() > 1) {
    std::fflush(nullptr);
    std::vector<pid_t> children;
    for (auto seed : seeds) {
      const pid_t pid = ::fork();
      if (pid == 0) {
        std::fflush(nullptr);
        ::_exit(run_one(command, config_for(seed), o));
      }
      if (pid < 0) {
        report_error("internal", "fork failed");
        return kExitConfig;
      }
      children.push_back(pid);
    }
    for (pid_t pid : children) {
      int status = 0;
      ::waitpid(pid, &status, 0);
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitConfig;
      worst = std::max(worst, code);
    }
    return worst;
  }
  for (auto seed : seeds) worst = std::max(worst, run_one(command, config_for(seed), o));
  return worst;
}

int cmd_oracle(const std::string& config_path, const std::optional<double>& alpha,
               const std::string& out) {
  try {
    SearchConfig cfg = load_config(config_path);
    const double a = alpha.value_or(cfg.alpha);
    if (cfg.surrogate.noise_std != 0.0) {
      throw ConfigError("the oracle needs a noise-free surrogate (surrogate.noise_std = 0)");
    }
    const OracleReport report = oracle_enumerate(cfg.surrogate, a);
    const fs::path path = out.empty() ? default_out_root() / "oracle.csv" : fs::path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string());
    report.write_csv(f);
    if (!f) throw IoError("write failed: " + path.string());
    const RankedGenotype& top = report.ranked().front();
    std::cout << "# top1 index=" << top.index << " objective=" << format_double(top.objective)
              << '\n'
              << serialize(genotype_from_index(top.index, cfg.max_cells));
    return kExitOk;
  } catch (...) {
    return handle_exception();
  }
}

// Seed of a report: the N of a "seed_N" path component, else its position.
std::uint64_t seed_of(const fs::path& p, std::size_t position) {
  static const std::regex re(R"(seed_([0-9]+))");
  for (const auto& part : p) {
    std::smatch m;
    const std::string s = part.string();
    if (std::regex_match(s, m, re)) return std::stoull(m[1].str());
  }
  return position;
}

int cmd_curves(const std::vector<std::string>& reports, const std::string& out) {
  try {
    std::ostringstream merged;
    merged << "iter,seed,best_return\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::ifstream f(reports[i]);
      if (!f) throw IoError("cannot open " + reports[i]);
      const auto records = read_report_csv(f, reports[i]);
      const auto seed = seed_of(reports[i], i);
      for (const auto& r : records) {
        merged << r.iter << ',' << seed << ',' << format_double(r.best_return) << '\n';
      }
    }
    if (out.empty() || out == "-") {
      std::cout << merged.str();
    } else {
      std::ofstream f(out, std::ios::trunc);
      f << merged.str();
      if (!f) throw IoError("cannot write " + out);
    }
    return kExitOk;
  } catch (...) {
    return handle_exception();
  }
}

int cmd_eval_stub(int psr_dim, int port) {
  try {
    if (port >= 0) {
      auto [fd, bound] = listen_loopback(port);
      std::cerr << nlohmann::json{{"event", "listening"}, {"port", bound}}.dump() << std::endl;
      serve_stub_once(fd, psr_dim);
      ::close(fd);
      return kExitOk;
    }
    LineChannel ch(STDIN_FILENO, STDOUT_FILENO, false);
    serve_stub(ch, psr_dim);
    return kExitOk;
  } catch (...) {
    return handle_exception();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy reinforcement-learning search over GAN generator cells"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", run_opts.config_path, "Config file (JSON)")->required();
    sub->add_option("--seed", run_opts.seeds, "Search seed; repeat for several runs");
    sub->add_option("--out", run_opts.out, "Output root (default $E2NAS_OUT or ./runs)");
    sub->add_option("--evaluator", run_opts.evaluator, "surrogate | external:<endpoint>");
    sub->add_flag("--parallel", run_opts.parallel, "One process per seed");
  };
  auto* search = app.add_subcommand("search", "Run the off-policy architecture search");
  add_run_flags(search);
  search->add_flag("--resume", run_opts.resume, "Continue from checkpoints in the output directory");
  search->add_option("--stop-after", run_opts.stop_after,
                     "Checkpoint and stop once this many iterations are done");
  auto* baseline = app.add_subcommand("baseline", "Run uniform random search with the same budget");
  add_run_flags(baseline);

  std::string oracle_config, oracle_out;
  std::optional<double> oracle_alpha;
  auto* oracle = app.add_subcommand("oracle", "Rank every genotype on the surrogate");
  oracle->add_option("--config", oracle_config, "Config file (JSON)")->required();
  oracle->add_option("--alpha", oracle_alpha, "FID weight override");
  oracle->add_option("--out", oracle_out, "CSV path (default <out root>/oracle.csv)");

  std::vector<std::string> curve_reports;
  std::string curves_out;
  auto* curves = app.add_subcommand("curves", "Merge report.csv files into iter,seed,best_return");
  curves->add_option("reports", curve_reports, "report.csv files")->required();
  curves->add_option("--out", curves_out, "Output CSV (default stdout)");

  int stub_psr = 64, stub_port = -1;
  auto* stub = app.add_subcommand("eval-stub", "Serve the echo-stub evaluator on stdio");
  stub->add_option("--psr-dim", stub_psr, "psr dimension reported in the handshake");
  stub->add_option("--listen", stub_port, "Serve one TCP connection on this loopback port instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitConfig;
  }

  if (*search) return cmd_run("search", run_opts);
  if (*baseline) return cmd_run("baseline", run_opts);
  if (*oracle) return cmd_oracle(oracle_config, oracle_alpha, oracle_out);
  if (*curves) return cmd_curves(curve_reports, curves_out);
  if (*stub) return cmd_eval_stub(stub_psr, stub_port);
  return kExitConfig;
}
