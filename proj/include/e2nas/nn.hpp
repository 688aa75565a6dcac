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

// Small dense MLP for the agent with ReLU hidden layers and a linear output.
// Gradients are derived by hand.
// Batches are column-major: one sample per column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "e2nas/binary_io.hpp"
#include "e2nas/errors.hpp"
#include "e2nas/random.hpp"

namespace e2nas::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;

  std::vector<int> dims() const {
    std::vector<int> d{input_dim};
    d.insert(d.end(), hidden_dims.begin(), hidden_dims.end());
    d.push_back(output_dim);
    return d;
  }
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

inline void validate(const MlpSpec& s) {
  for (int d : s.dims()) {
    if (d < 1) throw ShapeError("MLP dimensions must be >= 1");
  }
}

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct ParamSet {
  std::vector<Layer> layers;

  MlpSpec spec() const {
    MlpSpec s;
    s.input_dim = static_cast<int>(layers.front().weight.cols());
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      s.hidden_dims.push_back(static_cast<int>(layers[l].weight.rows()));
    }
    s.output_dim = static_cast<int>(layers.back().weight.rows());
    return s;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (const auto& l : layers) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
  }

  void assign_flat(std::span<const double> flat) {
    if (flat.size() != size()) {
      throw ShapeError("flat vector has " + std::to_string(flat.size()) + " values, expected " +
                       std::to_string(size()));
    }
    std::size_t at = 0;
    for (auto& l : layers) {
      std::copy_n(flat.data() + at, l.weight.size(), l.weight.data());
      at += l.weight.size();
      std::copy_n(flat.data() + at, l.bias.size(), l.bias.data());
      at += l.bias.size();
    }
  }

  bool same_shape(const ParamSet& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != o.layers[i].weight.rows() ||
          layers[i].weight.cols() != o.layers[i].weight.cols()) {
        return false;
      }
    }
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) {
        return false;
      }
    }
    return true;
  }
};

inline void check_same_shape(const ParamSet& a, const ParamSet& b) {
  if (!a.same_shape(b)) throw ShapeError("parameter sets have different shapes");
}

inline ParamSet zeros(const MlpSpec& spec) {
  validate(spec);
  const auto d = spec.dims();
  ParamSet p;
  for (std::size_t l = 0; l + 1 < d.size(); ++l) {
    p.layers.push_back({Matrix::Zero(d[l + 1], d[l]), Vector::Zero(d[l + 1])});
  }
  return p;
}

inline ParamSet zeros_like(const ParamSet& p) {
  ParamSet z = p;
  for (auto& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

// Glorot-uniform weights, zero biases.
inline ParamSet init_params(const MlpSpec& spec, Rng& rng) {
  ParamSet p = zeros(spec);
  for (auto& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
      l.weight.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }
  return p;
}

// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
};

inline Matrix forward_batch(const ParamSet& p, const Matrix& x, ForwardCache* cache = nullptr) {
  if (p.layers.empty()) throw ShapeError("empty parameter set");
  if (x.rows() != p.layers.front().weight.cols()) {
    throw ShapeError("input has dimension " + std::to_string(x.rows()) + ", expected " +
                     std::to_string(p.layers.front().weight.cols()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    Matrix z = layer.weight * h;
    z.colwise() += layer.bias;
    if (cache) cache->inputs.push_back(std::move(h));
    if (l + 1 < p.layers.size()) {
      if (cache) cache->pre.push_back(z);
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

struct BatchGradients {
  ParamSet params;   // summed over the batch
  Matrix input;      // one column per sample
};

// Gradients of sum_n upstream(:,n) . f(x_n) with respect to the parameters and
// the inputs.
inline BatchGradients backward_batch(const ParamSet& p, const ForwardCache& cache,
                                     const Matrix& upstream) {
  const std::size_t n_layers = p.layers.size();
  if (cache.inputs.size() != n_layers) throw ShapeError("forward cache does not match network");
  if (upstream.rows() != p.layers.back().weight.rows() ||
      upstream.cols() != cache.inputs.front().cols()) {
    throw ShapeError("upstream gradient has the wrong shape");
  }
  BatchGradients g{zeros_like(p), {}};
  Matrix delta = upstream;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    }
    g.params.layers[l].weight.noalias() = delta * cache.inputs[l].transpose();
    g.params.layers[l].bias = delta.rowwise().sum();
    delta = p.layers[l].weight.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

inline std::vector<double> forward(const ParamSet& p, std::span<const double> x) {
  const Matrix in = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Matrix out = forward_batch(p, in);
  return {out.data(), out.data() + out.size()};
}

struct Gradients {
  ParamSet params;
  std::vector<double> input;
};

inline Gradients backward(const ParamSet& p, std::span<const double> x,
                          std::span<const double> upstream) {
  ForwardCache cache;
  const Matrix in = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  forward_batch(p, in, &cache);
  const Matrix up =
      Eigen::Map<const Vector>(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  BatchGradients g = backward_batch(p, cache, up);
  return {std::move(g.params), {g.input.data(), g.input.data() + g.input.size()}};
}

// --- optimization -----------------------------------------------------------

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline AdamState make_adam(const ParamSet& p) { return {zeros_like(p), zeros_like(p)}; }

inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& st, double lr) {
  check_same_shape(params, grads);
  check_same_shape(params, st.m);
  check_same_shape(params, st.v);
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto apply = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    apply(params.layers[l].weight, grads.layers[l].weight, st.m.layers[l].weight,
          st.v.layers[l].weight);
    apply(params.layers[l].bias, grads.layers[l].bias, st.m.layers[l].bias, st.v.layers[l].bias);
  }
}

// target' = tau * online + (1 - tau) * target
inline ParamSet soft_update(const ParamSet& target, const ParamSet& online, double tau) {
  check_same_shape(target, online);
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
  ParamSet out = target;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    out.layers[l].weight = tau * online.layers[l].weight + (1.0 - tau) * target.layers[l].weight;
    out.layers[l].bias = tau * online.layers[l].bias + (1.0 - tau) * target.layers[l].bias;
  }
  return out;
}

// --- checkpoints ------------------------------------------------------------

inline constexpr int kParamFormatVersion = 1;

inline Section to_section(std::string name, const ParamSet& p) {
  Section s;
  s.name = std::move(name);
  s.header = {{"kind", "mlp"}, {"format", kParamFormatVersion}, {"dims", p.spec().dims()}};
  s.data = p.flatten();
  return s;
}

inline ParamSet from_section(const Section& s) {
  if (s.header.value("kind", "") != "mlp") throw FormatError("section '" + s.name + "' is not an MLP");
  if (s.header.value("format", 0) != kParamFormatVersion) {
    throw FormatError("section '" + s.name + "' has an unsupported parameter format");
  }
  const auto dims = s.header.at("dims").get<std::vector<int>>();
  if (dims.size() < 2) throw FormatError("section '" + s.name + "' has too few dims");
  MlpSpec spec{dims.front(), {dims.begin() + 1, dims.end() - 1}, dims.back()};
  ParamSet p = zeros(spec);
  if (s.data.size() != p.size()) throw FormatError("section '" + s.name + "' payload size mismatch");
  p.assign_flat(s.data);
  return p;
}

inline std::vector<Section> to_sections(const std::string& name, const AdamState& st) {
  Section m = to_section(name + ".m", st.m);
  Section v = to_section(name + ".v", st.v);
  m.header["step"] = st.step;
  return {std::move(m), std::move(v)};
}

inline AdamState adam_from_sections(const Container& c, const std::string& name) {
  AdamState st;
  const Section& m = c.at(name + ".m");
  st.m = from_section(m);
  st.v = from_section(c.at(name + ".v"));
  st.step = m.header.at("step").get<std::int64_t>();
  return st;
}

}  // namespace e2nas::nn
