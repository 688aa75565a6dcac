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

#include <cmath>
#include <string>
#include <vector>

#include "e2nas/errors.hpp"
#include "e2nas/genotype.hpp"

namespace e2nas {

// Scores of a generator prefix after its proxy training, plus the progressive
// state representation (psr) summarizing the newest cell's output.
struct EvalResult {
  double is_score = 0.0;
  double fid_score = 0.0;
  std::vector<double> psr;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct EvaluatorDescriptor {
  std::string name;
  int psr_dim = 0;
};

inline void check_result(const EvalResult& r, int psr_dim) {
  if (!std::isfinite(r.is_score) || !std::isfinite(r.fid_score)) {
    throw NumericDomainError("evaluator returned non-finite scores");
  }
  if (static_cast<int>(r.psr.size()) != psr_dim) {
    throw ShapeError("psr has dimension " + std::to_string(r.psr.size()) + ", expected " +
                     std::to_string(psr_dim));
  }
  for (double v : r.psr) {
    if (!std::isfinite(v)) throw NumericDomainError("evaluator returned non-finite psr");
  }
}

// The environment's "training process". evaluate() trains the given prefix
// (keeping weights of cells trained earlier in the same trajectory) and
// scores it; reset_weights() starts a fresh trajectory.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual EvalResult evaluate(const Genotype& prefix, int epochs) = 0;
  virtual void reset_weights() = 0;
  virtual EvaluatorDescriptor descriptor() const = 0;
};

}  // namespace e2nas
