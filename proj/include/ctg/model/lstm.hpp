// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctg/ad/adam.hpp"
#include "ctg/ad/tensor.hpp"
#include "ctg/util/rng.hpp"

namespace ctg::model {

// Single-layer LSTM. `weight` maps [x, h] to the four gates laid out as
// input, forget, output, candidate; shape [input + hidden, 4 * hidden].
struct LstmParams {
  ad::Tensor weight;
  ad::Tensor bias;
  std::size_t input = 0;
  std::size_t hidden = 0;

  static LstmParams init(std::size_t input, std::size_t hidden, double scale, util::Rng& rng);
  void append_parameters(const std::string& prefix, std::vector<ad::Parameter>& out) const;
  LstmParams frozen() const;
};

struct LstmState {
  ad::Tensor h;
  ad::Tensor c;
};

LstmState lstm_step(const LstmParams& p, const ad::Tensor& x, const LstmState& s);

// Runs over a time-major [steps * batch, input] sequence and returns the state
// after each sequence's last real step; steps at or past lengths[b] leave
// row b untouched, so extra padding never changes the result.
LstmState run_masked(const LstmParams& p, const ad::Tensor& inputs, std::size_t steps, std::size_t batch,
                     std::span<const std::size_t> lengths, const LstmState& init);

ad::Tensor uniform_tensor(ad::Shape shape, double scale, util::Rng& rng);

}  // namespace ctg::model
