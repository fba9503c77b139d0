// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctg/ad/tensor.hpp"

namespace ctg::ad {

struct Parameter {
  std::string name;
  Tensor tensor;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one per parameter in registration order.
struct OptimizerState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const std::vector<Parameter>& params, AdamOptions options);

// One bias-corrected Adam update of every parameter, in place, from the
// gradients currently stored on the tensors. Throws if any parameter has no
// gradient or if the state does not mirror the parameter shapes.
void adam_step(std::vector<Parameter>& params, OptimizerState& state);

// Rescales the stored gradients so their joint L2 norm is at most
// `max_norm`; returns the norm before rescaling. max_norm <= 0 leaves the
// gradients untouched. Parameters without a gradient count as zero.
double clip_grad_norm(std::vector<Parameter>& params, double max_norm);

// Owns a parameter group and its optimizer state.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter> params, AdamOptions options);

  void step() { adam_step(params_, state_); }
  void zero_grad();

  const std::vector<Parameter>& params() const { return params_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

 private:
  std::vector<Parameter> params_;
  OptimizerState state_;
};

}  // namespace ctg::ad
