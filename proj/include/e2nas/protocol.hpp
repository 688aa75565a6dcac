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

// Line-delimited JSON wire protocol spoken with out-of-process evaluators.
//
//   -> {"type":"hello","version":1}
//   <- {"type":"hello","version":1,"name":..,"psr_dim":D}
//   -> {"type":"evaluate","id":N,"epochs":E,"genotype":[{cell},..]}
//   <- {"type":"result","id":N,"is":..,"fid":..,"psr":[..D]}
//   -> {"type":"reset_weights","id":N}
//   <- {"type":"ok","id":N}
//   <- {"type":"error","id":N,"message":..}
//
// cell = {"conv":"pre|post","norm":"batch|instance|none",
//         "up":"bilinear|nearest|deconv","shortcut":0|1,"skips":[0|1,..]}

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "e2nas/errors.hpp"
#include "e2nas/evaluator.hpp"
#include "e2nas/genotype.hpp"
#include "e2nas/random.hpp"

namespace e2nas::protocol {

using nlohmann::json;

inline constexpr int kVersion = 1;

inline json cell_to_json(const CellGene& c) {
  json skips = json::array();
  for (bool b : c.skips) skips.push_back(b ? 1 : 0);
  return {{"conv", std::string(to_string(c.conv))},
          {"norm", std::string(to_string(c.norm))},
          {"up", std::string(to_string(c.up))},
          {"shortcut", c.shortcut ? 1 : 0},
          {"skips", std::move(skips)}};
}

inline json genotype_to_json(const Genotype& g) {
  json cells = json::array();
  for (const auto& c : g.cells) cells.push_back(cell_to_json(c));
  return cells;
}

inline Genotype genotype_from_json(const json& j, int max_cells = kDefaultMaxCells) {
  if (!j.is_array()) throw ParseError("genotype", "expected an array of cells");
  Genotype g;
  g.max_cells = max_cells;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& c = j[i];
    const std::string where = "genotype[" + std::to_string(i) + "]";
    if (!c.is_object()) throw ParseError(where, "expected an object");
    auto str = [&](const char* key) -> std::string {
      if (!c.contains(key) || !c[key].is_string()) throw ParseError(where + "." + key, "expected a string");
      return c[key].get<std::string>();
    };
    auto bit = [&](const json& v, const std::string& field) {
      if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
        throw ParseError(field, "expected 0 or 1");
      }
      return v.get<int>() == 1;
    };
    CellGene gene;
    const auto conv = parse_conv(str("conv"));
    if (!conv) throw ParseError(where + ".conv", "unknown value");
    const auto norm = parse_norm(str("norm"));
    if (!norm) throw ParseError(where + ".norm", "unknown value");
    const auto up = parse_upsample(str("up"));
    if (!up) throw ParseError(where + ".up", "unknown value");
    if (!c.contains("shortcut")) throw ParseError(where + ".shortcut", "missing");
    gene.conv = *conv;
    gene.norm = *norm;
    gene.up = *up;
    gene.shortcut = bit(c["shortcut"], where + ".shortcut");
    if (!c.contains("skips") || !c["skips"].is_array()) throw ParseError(where + ".skips", "expected an array");
    for (const auto& b : c["skips"]) gene.skips.push_back(bit(b, where + ".skips"));
    g.cells.push_back(std::move(gene));
  }
  validate(g);
  return g;
}

inline json hello_request() { return {{"type", "hello"}, {"version", kVersion}}; }

inline json evaluate_request(std::int64_t id, int epochs, const Genotype& g) {
  return {{"type", "evaluate"}, {"id", id}, {"epochs", epochs}, {"genotype", genotype_to_json(g)}};
}

inline json reset_request(std::int64_t id) { return {{"type", "reset_weights"}, {"id", id}}; }

inline json error_reply(const json& id, const std::string& message) {
  return {{"type", "error"}, {"id", id}, {"message", message}};
}

// Checksum the echo stub reports for a received genotype.
inline std::uint64_t genotype_checksum(const Genotype& g) {
  const std::string text = serialize(g);
  return fnv1a64(text.data(), text.size());
}

// The stub spreads the checksum over psr[0..3] as 16-bit chunks, most
// significant first; the remaining components are zero.
inline std::uint64_t checksum_from_psr(const std::vector<double>& psr) {
  if (psr.size() < 4) throw ShapeError("psr too short to carry a checksum");
  std::uint64_t h = 0;
  for (int k = 0; k < 4; ++k) h = (h << 16) | static_cast<std::uint64_t>(psr[k]);
  return h;
}

// Answers one request line for the echo-stub evaluator ("stub", D = psr_dim).
// Returns the reply line, or nullopt for a blank input line.
class EchoStub {
 public:
  explicit EchoStub(int psr_dim = 64) : psr_dim_(psr_dim) {
    if (psr_dim_ < 4) throw InvalidArgument("stub psr_dim must be >= 4");
  }

  std::optional<std::string> handle(const std::string& line) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) return std::nullopt;
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception& e) {
      return error_reply(nullptr, std::string("malformed request: ") + e.what()).dump();
    }
    const json id = req.contains("id") ? req["id"] : json(nullptr);
    const std::string type = req.value("type", "");
    if (type == "hello") {
      if (req.value("version", -1) != kVersion) return error_reply(id, "unsupported version").dump();
      return json{{"type", "hello"}, {"version", kVersion}, {"name", "stub"}, {"psr_dim", psr_dim_}}
          .dump();
    }
    if (type == "reset_weights") {
      ++resets_;
      return json{{"type", "ok"}, {"id", id}}.dump();
    }
    if (type == "evaluate") {
      Genotype g;
      try {
        g = genotype_from_json(req.at("genotype"));
      } catch (const std::exception& e) {
        return error_reply(id, e.what()).dump();
      }
      const std::uint64_t h = genotype_checksum(g);
      std::vector<double> psr(static_cast<std::size_t>(psr_dim_), 0.0);
      for (int k = 0; k < 4; ++k) psr[k] = static_cast<double>((h >> (16 * (3 - k))) & 0xffff);
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
      return json{{"type", "result"},
                  {"id", id},
                  {"is", static_cast<double>(g.depth())},
                  {"fid", static_cast<double>(resets_)},
                  {"psr", psr},
                  {"checksum", hex}}
          .dump();
    }
    return error_reply(id, "unknown message type '" + type + "'").dump();
  }

 private:
  int psr_dim_;
  std::int64_t resets_ = 0;
};

}  // namespace e2nas::protocol
