// SPDX-License-Identifier: Apache-2.0
#include "ctg/ad/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ctg::ad {

OptimizerState make_optimizer_state(const std::vector<Parameter>& params, AdamOptions options) {
  OptimizerState s;
  s.options = options;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.size(), 0.0);
    s.v.emplace_back(p.tensor.size(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Parameter>& params, OptimizerState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("optimizer state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.tensor.has_grad()) throw std::invalid_argument("parameter '" + p.name + "' has no gradient");
    if (state.m[i].size() != p.tensor.size() || state.v[i].size() != p.tensor.size()) {
      throw std::invalid_argument("optimizer state for '" + p.name + "' does not match shape " +
                                  shape_str(p.tensor.shape()));
    }
  }
  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor.mutable_values();
    const auto g = params[i].tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      w[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
    }
  }
}

double clip_grad_norm(std::vector<Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.tensor.node()->grad) g *= scale;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Parameter> params, AdamOptions options)
    : params_(std::move(params)), state_(make_optimizer_state(params_, options)) {}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace ctg::ad
