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

// Deterministic stand-in for GAN proxy training, and the exhaustive oracle
// that ranks every genotype of the space under it.
//
// Each cell i contributes c_i[k] in [0, 1] for its per-cell gene index k, and
// consecutive cells add a bonus b_i[conv_i][conv_{i+1}] in [0, 0.15]. All
// table entries come from a counter-based hash of (seed, stream, i, k), so
// nothing depends on evaluation order. The normalized score S of a prefix maps
// affinely onto IS (rising) and FID (falling).

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <vector>

#include "e2nas/errors.hpp"
#include "e2nas/evaluator.hpp"
#include "e2nas/genotype.hpp"
#include "e2nas/random.hpp"

namespace e2nas {

struct SurrogateSpec {
  std::uint64_t seed = 0;
  int psr_dim = 64;
  double is_base = 4.0;
  double is_span = 5.0;
  double fid_base = 45.0;
  double fid_span = 35.0;
  double noise_std = 0.0;
  int max_cells = kDefaultMaxCells;

  friend bool operator==(const SurrogateSpec&, const SurrogateSpec&) = default;
};

inline void validate(const SurrogateSpec& s) {
  if (s.psr_dim < 1) throw InvalidArgument("surrogate psr_dim must be positive");
  if (!(s.is_span > 0.0) || !(s.fid_span > 0.0)) throw InvalidArgument("spans must be > 0");
  if (!(s.noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
  if (!std::isfinite(s.is_base) || !std::isfinite(s.fid_base) || !std::isfinite(s.is_span) ||
      !std::isfinite(s.fid_span) || !std::isfinite(s.noise_std)) {
    throw InvalidArgument("surrogate parameters must be finite");
  }
  if (s.max_cells < 1 || s.max_cells > action_layout::kMaxSkips + 1) {
    throw InvalidArgument("surrogate max_cells out of range");
  }
}

class SurrogateEvaluator final : public Evaluator {
 public:
  static constexpr double kMaxBonus = 0.15;

  explicit SurrogateEvaluator(const SurrogateSpec& spec) : spec_(spec) {
    validate(spec_);
    contrib_.resize(spec_.max_cells);
    for (int i = 0; i < spec_.max_cells; ++i) {
      const std::uint64_t n = cell_gene_count(i);
      contrib_[i].resize(n);
      for (std::uint64_t k = 0; k < n; ++k) {
        contrib_[i][k] = unit_hash(spec_.seed, {kStreamCell, static_cast<std::uint64_t>(i), k});
      }
    }
    bonus_.resize(std::max(0, spec_.max_cells - 1));
    for (int i = 0; i + 1 < spec_.max_cells; ++i) {
      for (std::uint64_t pq = 0; pq < 4; ++pq) {
        bonus_[i][pq] =
            kMaxBonus * unit_hash(spec_.seed, {kStreamBonus, static_cast<std::uint64_t>(i), pq});
      }
    }
    max_score_ = spec_.max_cells + kMaxBonus * (spec_.max_cells - 1);
    psr_weights_.resize(static_cast<std::size_t>(spec_.psr_dim) * kPsrFeatures);
    for (int j = 0; j < spec_.psr_dim; ++j) {
      for (int f = 0; f < kPsrFeatures; ++f) {
        psr_weights_[j * kPsrFeatures + f] =
            2.0 * unit_hash(spec_.seed, {kStreamPsr, static_cast<std::uint64_t>(j),
                                         static_cast<std::uint64_t>(f)}) -
            1.0;
      }
    }
  }

  const SurrogateSpec& spec() const noexcept { return spec_; }

  double contribution(int cell, std::uint64_t gene_index) const {
    return contrib_.at(cell).at(gene_index);
  }
  double bonus(int cell, ConvType a, ConvType b) const {
    return bonus_.at(cell)[static_cast<int>(a) * 2 + static_cast<int>(b)];
  }

  // Raw sum of contributions and bonuses of the placed cells.
  double raw_score(const Genotype& prefix) const {
    check_prefix(prefix);
    double sum = 0.0;
    for (int i = 0; i < prefix.depth(); ++i) {
      sum += contrib_[i][cell_gene_index(prefix.cells[i])];
      if (i > 0) sum += bonus(i - 1, prefix.cells[i - 1].conv, prefix.cells[i].conv);
    }
    return sum;
  }

  // Normalized score S in [0, 1].
  double score(const Genotype& prefix) const {
    return std::clamp(raw_score(prefix) / max_score_, 0.0, 1.0);
  }

  // Noise-free evaluation; a pure function of (spec, prefix).
  EvalResult evaluate_pure(const Genotype& prefix) const {
    const double s = score(prefix);
    EvalResult r;
    r.is_score = spec_.is_base + spec_.is_span * s;
    r.fid_score = spec_.fid_base - spec_.fid_span * s;
    r.psr = psr(prefix);
    return r;
  }

  // Final objective IS - alpha * FID of a complete genotype, noise-free.
  double objective(const Genotype& g, double alpha) const {
    const double s = score(g);
    return (spec_.is_base + spec_.is_span * s) - alpha * (spec_.fid_base - spec_.fid_span * s);
  }

  EvalResult evaluate(const Genotype& prefix, int epochs) override {
    if (epochs < 1) throw InvalidArgument("epochs must be positive");
    EvalResult r = evaluate_pure(prefix);
    if (spec_.noise_std > 0.0) {
      const auto d = static_cast<std::uint64_t>(prefix.depth());
      r.is_score += spec_.noise_std * hashed_normal({kStreamNoise, trajectory_, d, 0});
      r.fid_score += spec_.noise_std * hashed_normal({kStreamNoise, trajectory_, d, 1});
    }
    return r;
  }

  // Only the noise stream observes resets; the noise-free surrogate is stateless.
  void reset_weights() override { ++trajectory_; }

  EvaluatorDescriptor descriptor() const override { return {"surrogate", spec_.psr_dim}; }

 private:
  static constexpr std::uint64_t kStreamCell = 1;
  static constexpr std::uint64_t kStreamBonus = 2;
  static constexpr std::uint64_t kStreamPsr = 3;
  static constexpr std::uint64_t kStreamNoise = 4;
  // one-hot conv(2) norm(3) up(3) shortcut(2), skip fraction, depth fraction, bias
  static constexpr int kPsrFeatures = 13;

  void check_prefix(const Genotype& prefix) const {
    if (prefix.depth() < 1 || prefix.depth() > spec_.max_cells) {
      throw InvalidArgument("surrogate prefix must hold 1.." + std::to_string(spec_.max_cells) +
                            " cells");
    }
    for (int i = 0; i < prefix.depth(); ++i) validate_gene(prefix.cells[i], i);
  }

  // Stand-in for the down-sampled mean output of the newest cell: a fixed
  // random projection of its gene features, squashed into [-1, 1].
  std::vector<double> psr(const Genotype& prefix) const {
    const CellGene& c = prefix.cells.back();
    double x[kPsrFeatures] = {};
    x[static_cast<int>(c.conv)] = 1.0;
    x[2 + static_cast<int>(c.norm)] = 1.0;
    x[5 + static_cast<int>(c.up)] = 1.0;
    x[8 + (c.shortcut ? 0 : 1)] = 1.0;
    const auto skips = std::count(c.skips.begin(), c.skips.end(), true);
    x[10] = c.skips.empty() ? 0.0 : static_cast<double>(skips) / c.skips.size();
    x[11] = static_cast<double>(prefix.depth()) / spec_.max_cells;
    x[12] = 1.0;
    std::vector<double> out(spec_.psr_dim);
    for (int j = 0; j < spec_.psr_dim; ++j) {
      double acc = 0.0;
      for (int f = 0; f < kPsrFeatures; ++f) acc += psr_weights_[j * kPsrFeatures + f] * x[f];
      out[j] = std::tanh(acc);
    }
    return out;
  }

  double hashed_normal(std::initializer_list<std::uint64_t> words) const {
    const std::uint64_t h = hash_words(spec_.seed, words);
    const double u1 = 1.0 - to_unit(h);
    const double u2 = to_unit(mix64(h));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  SurrogateSpec spec_;
  std::vector<std::vector<double>> contrib_;
  std::vector<std::array<double, 4>> bonus_;
  double max_score_ = 1.0;
  std::vector<double> psr_weights_;
  std::uint64_t trajectory_ = 0;
};

inline SurrogateEvaluator build_surrogate(const SurrogateSpec& spec) {
  return SurrogateEvaluator(spec);
}

// --- oracle -----------------------------------------------------------------

struct RankedGenotype {
  std::uint64_t index = 0;
  double objective = 0.0;
};

class OracleReport {
 public:
  OracleReport(std::vector<RankedGenotype> ranked, std::vector<double> by_index)
      : ranked_(std::move(ranked)), by_index_(std::move(by_index)) {}

  // Sorted by objective descending, ties by index ascending.
  const std::vector<RankedGenotype>& ranked() const noexcept { return ranked_; }
  std::size_t size() const noexcept { return ranked_.size(); }
  double objective_of(std::uint64_t index) const { return by_index_.at(index); }

  // Percentage of the space whose objective is <= x.
  double percentile(double x) const {
    const auto above = std::partition_point(ranked_.begin(), ranked_.end(),
                                            [x](const RankedGenotype& r) { return r.objective > x; });
    const auto not_above = ranked_.end() - above;
    return 100.0 * static_cast<double>(not_above) / static_cast<double>(ranked_.size());
  }
  double percentile_of_index(std::uint64_t index) const { return percentile(objective_of(index)); }

  // 1-based rank: one plus the number of strictly better genotypes.
  std::size_t rank_of(double x) const {
    const auto above = std::partition_point(ranked_.begin(), ranked_.end(),
                                            [x](const RankedGenotype& r) { return r.objective > x; });
    return static_cast<std::size_t>(above - ranked_.begin()) + 1;
  }

  void write_csv(std::ostream& out) const {
    out << "rank,genotype_index,objective\n";
    char buf[64];
    for (std::size_t r = 0; r < ranked_.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", ranked_[r].objective);
      out << (r + 1) << ',' << ranked_[r].index << ',' << buf << '\n';
    }
  }

 private:
  std::vector<RankedGenotype> ranked_;
  std::vector<double> by_index_;
};

inline OracleReport oracle_enumerate(const SurrogateSpec& spec, double alpha) {
  if (spec.noise_std != 0.0) {
    throw InvalidArgument("the oracle is only defined for a noise-free surrogate");
  }
  if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
  const SurrogateEvaluator sur(spec);
  const std::uint64_t n = space_size(spec.max_cells);
  std::vector<double> by_index(n);
  std::vector<RankedGenotype> ranked(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const EvalResult r = sur.evaluate_pure(genotype_from_index(i, spec.max_cells));
    by_index[i] = r.is_score - alpha * r.fid_score;
    ranked[i] = {i, by_index[i]};
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedGenotype& a, const RankedGenotype& b) {
    return a.objective != b.objective ? a.objective > b.objective : a.index < b.index;
  });
  return OracleReport(std::move(ranked), std::move(by_index));
}

}  // namespace e2nas
