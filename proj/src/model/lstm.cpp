// SPDX-License-Identifier: Apache-2.0
#include "ctg/model/lstm.hpp"

#include <cmath>
#include <stdexcept>

#include "ctg/ad/ops.hpp"

namespace ctg::model {

ad::Tensor uniform_tensor(ad::Shape shape, double scale, util::Rng& rng) {
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

LstmParams LstmParams::init(std::size_t input, std::size_t hidden, double scale, util::Rng& rng) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.weight = uniform_tensor({input + hidden, 4 * hidden}, scale, rng);
  std::vector<double> b(4 * hidden, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
  p.bias = ad::Tensor::from({4 * hidden}, std::move(b), true);
  return p;
}

void LstmParams::append_parameters(const std::string& prefix, std::vector<ad::Parameter>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LstmParams LstmParams::frozen() const {
  LstmParams p = *this;
  p.weight = weight.detach();
  p.bias = bias.detach();
  return p;
}

LstmState lstm_step(const LstmParams& p, const ad::Tensor& x, const LstmState& s) {
  const std::size_t H = p.hidden;
  auto gates = ad::matmul(ad::concat({x, s.h}, 1), p.weight) + p.bias;
  auto i = ad::sigmoid(ad::slice_cols(gates, 0, H));
  auto f = ad::sigmoid(ad::slice_cols(gates, H, 2 * H));
  auto o = ad::sigmoid(ad::slice_cols(gates, 2 * H, 3 * H));
  auto g = ad::tanh(ad::slice_cols(gates, 3 * H, 4 * H));
  auto c = f * s.c + i * g;
  auto h = o * ad::tanh(c);
  return {h, c};
}

LstmState run_masked(const LstmParams& p, const ad::Tensor& inputs, std::size_t steps, std::size_t batch,
                     std::span<const std::size_t> lengths, const LstmState& init) {
  LstmState s = init;
  for (std::size_t t = 0; t < steps; ++t) {
    auto x = ad::slice_rows(inputs, t * batch, (t + 1) * batch);
    LstmState next = lstm_step(p, x, s);
    std::vector<double> keep(batch);
    bool all_live = true;
    for (std::size_t b = 0; b < batch; ++b) {
      keep[b] = t < lengths[b] ? 1.0 : 0.0;
      all_live = all_live && keep[b] == 1.0;
    }
    for (double v : next.h.values()) {
      if (!std::isfinite(v)) throw std::domain_error("non-finite LSTM activation at step " + std::to_string(t));
    }
    if (all_live) {
      s = next;
    } else {
      auto m = ad::Tensor::from({batch, 1}, keep);
      for (auto& k : keep) k = 1.0 - k;
      auto hold = ad::Tensor::from({batch, 1}, std::move(keep));
      s.h = m * next.h + hold * s.h;
      s.c = m * next.c + hold * s.c;
    }
  }
  return s;
}

}  // namespace ctg::model
