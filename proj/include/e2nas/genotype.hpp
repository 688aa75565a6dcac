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

// Discrete generator-cell search space and the mapping from the agent's
// continuous 12-dim action onto cell genes.
//
// Action layout: conv[0,2) norm[2,5) upsample[5,8) shortcut[8,10) skip[10,12).
// Categorical partitions decode by argmax (lowest index wins ties); each skip
// component is an independent binary thresholded at zero.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "e2nas/errors.hpp"

namespace e2nas {

inline constexpr int kActionDim = 12;
inline constexpr int kDefaultMaxCells = 3;

using ActionVector = std::array<double, kActionDim>;

enum class ConvType : std::uint8_t { pre_activation = 0, post_activation = 1 };
enum class NormType : std::uint8_t { batch = 0, instance = 1, none = 2 };
enum class UpsampleType : std::uint8_t { bilinear = 0, nearest = 1, deconv = 2 };

namespace action_layout {
inline constexpr int kConv = 0;
inline constexpr int kNorm = 2;
inline constexpr int kUpsample = 5;
// Slot 8 is "shortcut on", slot 9 "shortcut off".
inline constexpr int kShortcut = 8;
inline constexpr int kSkip = 10;
inline constexpr int kMaxSkips = kActionDim - kSkip;
}  // namespace action_layout

struct CellGene {
  ConvType conv = ConvType::pre_activation;
  NormType norm = NormType::batch;
  UpsampleType up = UpsampleType::bilinear;
  bool shortcut = true;
  // skips[j] set: this cell takes an input from cell j. Length = cell index.
  std::vector<bool> skips;

  friend bool operator==(const CellGene&, const CellGene&) = default;
};

struct Genotype {
  std::vector<CellGene> cells;
  int max_cells = kDefaultMaxCells;

  int depth() const noexcept { return static_cast<int>(cells.size()); }

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

// --- names ------------------------------------------------------------------

inline std::string_view to_string(ConvType c) {
  return c == ConvType::pre_activation ? "pre" : "post";
}
inline std::string_view to_string(NormType n) {
  switch (n) {
    case NormType::batch: return "batch";
    case NormType::instance: return "instance";
    case NormType::none: return "none";
  }
  return "?";
}
inline std::string_view to_string(UpsampleType u) {
  switch (u) {
    case UpsampleType::bilinear: return "bilinear";
    case UpsampleType::nearest: return "nearest";
    case UpsampleType::deconv: return "deconv";
  }
  return "?";
}

inline std::optional<ConvType> parse_conv(std::string_view s) {
  if (s == "pre") return ConvType::pre_activation;
  if (s == "post") return ConvType::post_activation;
  return std::nullopt;
}
inline std::optional<NormType> parse_norm(std::string_view s) {
  if (s == "batch") return NormType::batch;
  if (s == "instance") return NormType::instance;
  if (s == "none") return NormType::none;
  return std::nullopt;
}
inline std::optional<UpsampleType> parse_upsample(std::string_view s) {
  if (s == "bilinear") return UpsampleType::bilinear;
  if (s == "nearest") return UpsampleType::nearest;
  if (s == "deconv") return UpsampleType::deconv;
  return std::nullopt;
}

// --- validation -------------------------------------------------------------

inline void validate_gene(const CellGene& g, int cell_index) {
  if (static_cast<int>(g.skips.size()) != cell_index) {
    throw ValidationError("cell " + std::to_string(cell_index) + ": skips length " +
                          std::to_string(g.skips.size()) + " != cell index");
  }
  if (static_cast<unsigned>(g.conv) > 1 || static_cast<unsigned>(g.norm) > 2 ||
      static_cast<unsigned>(g.up) > 2) {
    throw ValidationError("cell " + std::to_string(cell_index) + ": enum out of range");
  }
}

inline void validate(const Genotype& g) {
  if (g.max_cells < 1) throw ValidationError("max_cells must be positive");
  if (g.max_cells > action_layout::kMaxSkips + 1) {
    throw ValidationError("max_cells exceeds the skip capacity of the action vector");
  }
  if (g.depth() > g.max_cells) {
    throw ValidationError("genotype has " + std::to_string(g.depth()) + " cells, max " +
                          std::to_string(g.max_cells));
  }
  for (int i = 0; i < g.depth(); ++i) validate_gene(g.cells[i], i);
}

// --- action decoding ---------------------------------------------------------

namespace detail {
inline int argmax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}
}  // namespace detail

inline CellGene decode_action(std::span<const double, kActionDim> a, int cell_index,
                              int max_cells = kDefaultMaxCells) {
  using namespace action_layout;
  if (cell_index < 0 || cell_index >= max_cells || cell_index > kMaxSkips) {
    throw InvalidArgument("cell index " + std::to_string(cell_index) + " outside [0, " +
                          std::to_string(max_cells) + ")");
  }
  CellGene g;
  g.conv = static_cast<ConvType>(detail::argmax(a.subspan(kConv, 2)));
  g.norm = static_cast<NormType>(detail::argmax(a.subspan(kNorm, 3)));
  g.up = static_cast<UpsampleType>(detail::argmax(a.subspan(kUpsample, 3)));
  g.shortcut = detail::argmax(a.subspan(kShortcut, 2)) == 0;
  g.skips.resize(cell_index);
  for (int j = 0; j < cell_index; ++j) g.skips[j] = a[kSkip + j] > 0.0;
  return g;
}

inline ActionVector encode_center(const CellGene& g) {
  using namespace action_layout;
  ActionVector a;
  a.fill(-0.9);
  a[kConv + static_cast<int>(g.conv)] = 0.9;
  a[kNorm + static_cast<int>(g.norm)] = 0.9;
  a[kUpsample + static_cast<int>(g.up)] = 0.9;
  a[kShortcut + (g.shortcut ? 0 : 1)] = 0.9;
  for (std::size_t j = 0; j < g.skips.size() && j < kMaxSkips; ++j) {
    a[kSkip + j] = g.skips[j] ? 0.9 : -0.9;
  }
  return a;
}

// --- canonical indexing -----------------------------------------------------
//
// Per-cell index: digits (conv, norm, up, shortcut-slot) in mixed radix
// 2*3*3*2, followed by the skip bits, skip-from-cell-0 most significant.
// Genotype index: per-cell indices in mixed radix, cell 0 most significant.

inline std::uint64_t cell_gene_count(int cell_index) {
  return std::uint64_t{36} << cell_index;
}

inline std::uint64_t space_size(int num_cells) {
  std::uint64_t n = 1;
  for (int i = 0; i < num_cells; ++i) n *= cell_gene_count(i);
  return n;
}

inline std::uint64_t cell_gene_index(const CellGene& g) {
  std::uint64_t k = static_cast<std::uint64_t>(g.conv);
  k = k * 3 + static_cast<std::uint64_t>(g.norm);
  k = k * 3 + static_cast<std::uint64_t>(g.up);
  k = k * 2 + (g.shortcut ? 0 : 1);
  for (bool b : g.skips) k = (k << 1) | (b ? 1 : 0);
  return k;
}

inline CellGene cell_gene_from_index(std::uint64_t k, int cell_index) {
  if (cell_index < 0 || k >= cell_gene_count(cell_index)) {
    throw InvalidArgument("cell gene index out of range");
  }
  CellGene g;
  g.skips.resize(cell_index);
  for (int j = cell_index - 1; j >= 0; --j) {
    g.skips[j] = (k & 1) != 0;
    k >>= 1;
  }
  g.shortcut = (k % 2) == 0;
  k /= 2;
  g.up = static_cast<UpsampleType>(k % 3);
  k /= 3;
  g.norm = static_cast<NormType>(k % 3);
  k /= 3;
  g.conv = static_cast<ConvType>(k);
  return g;
}

inline std::uint64_t genotype_index(const Genotype& g) {
  validate(g);
  std::uint64_t idx = 0;
  for (int i = 0; i < g.depth(); ++i) {
    idx = idx * cell_gene_count(i) + cell_gene_index(g.cells[i]);
  }
  return idx;
}

inline Genotype genotype_from_index(std::uint64_t index, int num_cells, int max_cells = 0) {
  if (max_cells == 0) max_cells = num_cells;
  if (num_cells < 0 || num_cells > max_cells) throw InvalidArgument("bad cell count");
  if (index >= space_size(num_cells)) {
    throw InvalidArgument("genotype index " + std::to_string(index) + " out of range");
  }
  Genotype g;
  g.max_cells = max_cells;
  g.cells.resize(num_cells);
  for (int i = num_cells - 1; i >= 0; --i) {
    const std::uint64_t n = cell_gene_count(i);
    g.cells[i] = cell_gene_from_index(index % n, i);
    index /= n;
  }
  return g;
}

// --- text form --------------------------------------------------------------

inline std::string skips_to_bits(const std::vector<bool>& skips) {
  std::string s;
  for (bool b : skips) s.push_back(b ? '1' : '0');
  return s;
}

inline std::string to_text(const CellGene& g, int cell_index) {
  std::string s = "cell " + std::to_string(cell_index) + ": conv=";
  s += to_string(g.conv);
  s += " norm=";
  s += to_string(g.norm);
  s += " up=";
  s += to_string(g.up);
  s += " shortcut=";
  s += g.shortcut ? '1' : '0';
  s += " skips=" + skips_to_bits(g.skips);
  return s;
}

inline std::string serialize(const Genotype& g) {
  std::string out;
  for (int i = 0; i < g.depth(); ++i) {
    out += to_text(g.cells[i], i);
    out += '\n';
  }
  return out;
}

namespace detail {
inline std::string_view expect_key(std::string_view tok, std::string_view key,
                                   const std::string& where) {
  if (tok.size() < key.size() + 1 || tok.substr(0, key.size()) != key ||
      tok[key.size()] != '=') {
    throw ParseError(where + "." + std::string(key),
                     "expected '" + std::string(key) + "=', got '" + std::string(tok) + "'");
  }
  return tok.substr(key.size() + 1);
}
}  // namespace detail

inline Genotype deserialize(std::string_view text, int max_cells = kDefaultMaxCells) {
  Genotype g;
  g.max_cells = max_cells;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "cell[" + std::to_string(g.cells.size()) + "]";
    std::istringstream ls(line);
    std::string word, idx_tok;
    ls >> word >> idx_tok;
    if (word != "cell") throw ParseError(where, "line must start with 'cell'");
    if (idx_tok.empty() || idx_tok.back() != ':') throw ParseError(where + ".index", "missing ':'");
    idx_tok.pop_back();
    int idx = -1;
    try {
      std::size_t used = 0;
      idx = std::stoi(idx_tok, &used);
      if (used != idx_tok.size()) idx = -1;
    } catch (const std::exception&) {
      idx = -1;
    }
    if (idx != static_cast<int>(g.cells.size())) {
      throw ParseError(where + ".index", "expected cell " + std::to_string(g.cells.size()) +
                                             ", got '" + idx_tok + "'");
    }
    std::string t_conv, t_norm, t_up, t_short, t_skips, extra;
    ls >> t_conv >> t_norm >> t_up >> t_short >> t_skips;
    if (ls >> extra) throw ParseError(where, "trailing token '" + extra + "'");

    CellGene c;
    const auto conv = parse_conv(detail::expect_key(t_conv, "conv", where));
    if (!conv) throw ParseError(where + ".conv", "unknown value '" + t_conv + "'");
    const auto norm = parse_norm(detail::expect_key(t_norm, "norm", where));
    if (!norm) throw ParseError(where + ".norm", "unknown value '" + t_norm + "'");
    const auto up = parse_upsample(detail::expect_key(t_up, "up", where));
    if (!up) throw ParseError(where + ".up", "unknown value '" + t_up + "'");
    const auto sc = detail::expect_key(t_short, "shortcut", where);
    if (sc != "0" && sc != "1") throw ParseError(where + ".shortcut", "expected 0 or 1");
    if (t_skips.empty()) throw ParseError(where + ".skips", "missing");
    const auto bits = detail::expect_key(t_skips, "skips", where);
    c.conv = *conv;
    c.norm = *norm;
    c.up = *up;
    c.shortcut = sc == "1";
    for (char ch : bits) {
      if (ch != '0' && ch != '1') throw ParseError(where + ".skips", "not a bitstring");
      c.skips.push_back(ch == '1');
    }
    g.cells.push_back(std::move(c));
  }
  if (g.cells.empty()) throw ParseError("genotype", "no cells");
  validate(g);
  return g;
}

}  // namespace e2nas
