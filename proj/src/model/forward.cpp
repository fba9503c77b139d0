// SPDX-License-Identifier: Apache-2.0
#include "ctg/model/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ctg/ad/ops.hpp"

namespace ctg::model {

namespace {

using ad::Tensor;

// Embedding with the PAD row forced to zero.
Tensor masked_embedding(const Tensor& emb) {
  std::vector<double> keep(emb.rows(), 1.0);
  keep[text::kPad] = 0.0;
  return ad::mul(emb, Tensor::from({emb.rows(), 1}, std::move(keep)));
}

void check_code(const LatentCode& code) {
  if (code.z.rows() != code.c.rows()) {
    throw ad::ShapeError("latent code batch mismatch: z " + ad::shape_str(code.z.shape()) + ", c " +
                         ad::shape_str(code.c.shape()));
  }
}

LstmState initial_state(const GeneratorParams& gen, const Tensor& zc) {
  const std::size_t H = gen.lstm.hidden;
  auto proj = ad::matmul(zc, gen.init_weight) + gen.init_bias;
  return {ad::slice_cols(proj, 0, H), ad::slice_cols(proj, H, 2 * H)};
}

Tensor step_input(const GeneratorParams& gen, const Tensor& emb, const Tensor& zc) {
  return gen.feed_latent ? ad::concat({emb, zc}, 1) : emb;
}

Gaussian heads(const EncoderParams& enc, const Tensor& h) {
  return {ad::matmul(h, enc.mu_weight) + enc.mu_bias, ad::matmul(h, enc.logvar_weight) + enc.logvar_bias};
}

LstmState zero_state(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

template <class Pick>
std::vector<text::TokenSequence> rollout(const GeneratorParams& params, const LatentCode& code, double tau,
                                         std::size_t max_steps, Pick pick) {
  check_code(code);
  const GeneratorParams gen = params.frozen();
  const LatentCode frozen{code.z.detach(), code.c.detach()};
  const std::size_t B = frozen.batch();
  const auto zc = ad::concat({frozen.z, frozen.c}, 1);
  const auto emb = masked_embedding(gen.embedding);
  auto state = initial_state(gen, zc);
  std::vector<int> inputs(B, text::kBos);
  std::vector<text::TokenSequence> out(B);
  std::vector<bool> live(B, true);
  for (std::size_t t = 0; t < max_steps; ++t) {
    state = lstm_step(gen.lstm, step_input(gen, ad::row_gather(emb, inputs), zc), state);
    auto probs = ad::softmax(ad::matmul(state.h, gen.out_weight) + gen.out_bias, tau);
    const std::size_t V = probs.cols();
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) {
      if (!live[b]) {
        inputs[b] = text::kEos;
        continue;
      }
      const int tok = pick(probs.values().data() + b * V, V);
      if (tok == text::kEos) {
        live[b] = false;
      } else {
        out[b].push_back(tok);
        any = true;
      }
      inputs[b] = tok;
    }
    if (!any && std::none_of(live.begin(), live.end(), [](bool v) { return v; })) break;
  }
  return out;
}

}  // namespace

SoftSequence one_hot_sequence(const text::Batch& batch, std::size_t vocab) {
  const std::size_t B = batch.size;
  const std::size_t S = batch.longest() - 1;
  std::vector<int> ids(S * B);
  SoftSequence seq;
  seq.steps = S;
  seq.batch = B;
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t b = 0; b < B; ++b) ids[t * B + b] = batch.id(b, t + 1);
  }
  for (std::size_t b = 0; b < B; ++b) seq.lengths.push_back(batch.lengths[b] - 1);
  seq.rows = ad::one_hot(ids, vocab);
  return seq;
}

SoftSequence one_hot_sequence(const std::vector<text::TokenSequence>& seqs, std::size_t vocab) {
  std::size_t longest = 0;
  for (const auto& s : seqs) longest = std::max(longest, s.size());
  return one_hot_sequence(text::make_batch(std::span<const text::TokenSequence>(seqs), longest), vocab);
}

Tensor code_from_categories(const ModelDims& dims, const std::vector<std::vector<int>>& categories) {
  if (categories.size() != dims.attributes.size()) {
    throw std::invalid_argument("expected categories for " + std::to_string(dims.attributes.size()) +
                                " attributes, got " + std::to_string(categories.size()));
  }
  const std::size_t B = categories.empty() ? 0 : categories[0].size();
  const std::size_t D = dims.code_dim();
  std::vector<double> c(B * D, 0.0);
  for (std::size_t a = 0; a < categories.size(); ++a) {
    if (categories[a].size() != B) throw std::invalid_argument("category lists differ in batch size");
    const std::size_t off = dims.attribute_offset(a);
    for (std::size_t b = 0; b < B; ++b) {
      const int k = categories[a][b];
      if (k < 0 || static_cast<std::size_t>(k) >= dims.attributes[a].categories) {
        throw std::out_of_range("category " + std::to_string(k) + " outside attribute " + dims.attributes[a].name);
      }
      c[b * D + off + static_cast<std::size_t>(k)] = 1.0;
    }
  }
  return Tensor::from({B, D}, std::move(c));
}

PriorSample sample_prior(const ModelDims& dims, std::size_t batch, util::Rng& rng) {
  std::vector<double> z(batch * dims.d_z);
  for (auto& v : z) v = rng.normal();
  PriorSample s;
  for (const auto& a : dims.attributes) {
    std::vector<int> cats(batch);
    for (auto& k : cats) k = static_cast<int>(rng.below(a.categories));
    s.categories.push_back(std::move(cats));
  }
  s.code.z = Tensor::from({batch, dims.d_z}, std::move(z));
  s.code.c = code_from_categories(dims, s.categories);
  return s;
}

Gaussian encode(const EncoderParams& enc, const text::Batch& batch) {
  const std::size_t B = batch.size;
  const std::size_t S = batch.longest() - 1;
  std::vector<int> ids(S * B);
  std::vector<std::size_t> lengths(B);
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t b = 0; b < B; ++b) ids[t * B + b] = batch.id(b, t + 1);
  }
  for (std::size_t b = 0; b < B; ++b) lengths[b] = batch.lengths[b] - 1;
  auto inputs = ad::row_gather(masked_embedding(enc.embedding), ids);
  auto s = run_masked(enc.lstm, inputs, S, B, lengths, zero_state(B, enc.lstm.hidden));
  return heads(enc, s.h);
}

Gaussian encode(const EncoderParams& enc, const SoftSequence& seq) {
  auto inputs = ad::matmul(seq.rows, masked_embedding(enc.embedding));
  auto s = run_masked(enc.lstm, inputs, seq.steps, seq.batch, seq.lengths, zero_state(seq.batch, enc.lstm.hidden));
  return heads(enc, s.h);
}

Tensor reparameterize(const Gaussian& q, const Tensor& eps) {
  if (eps.shape() != q.mu.shape() || q.logvar.shape() != q.mu.shape()) {
    throw ad::ShapeError("reparameterize: mu " + ad::shape_str(q.mu.shape()) + ", logvar " +
                         ad::shape_str(q.logvar.shape()) + ", eps " + ad::shape_str(eps.shape()));
  }
  return q.mu + ad::exp(q.logvar * 0.5) * eps;
}

TeacherForced decode_teacher_forced(const GeneratorParams& gen, const LatentCode& code, const text::Batch& batch) {
  check_code(code);
  const std::size_t B = batch.size;
  if (code.batch() != B) throw ad::ShapeError("latent code and batch differ in size");
  if (batch.longest() < 2 || batch.longest() > batch.width) {
    throw std::invalid_argument("batch length " + std::to_string(batch.longest()) + " exceeds width " +
                                std::to_string(batch.width));
  }
  const std::size_t S = batch.longest() - 1;
  const std::size_t V = gen.out_weight.cols();
  const auto zc = ad::concat({code.z, code.c}, 1);
  const auto emb = masked_embedding(gen.embedding);
  std::vector<int> ids(S * B);
  std::vector<int> targets(S * B);
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      ids[t * B + b] = batch.id(b, t);
      targets[t * B + b] = batch.id(b, t + 1);
    }
  }
  auto inputs = ad::row_gather(emb, ids);
  auto state = initial_state(gen, zc);
  std::vector<Tensor> hs;
  hs.reserve(S);
  for (std::size_t t = 0; t < S; ++t) {
    state = lstm_step(gen.lstm, step_input(gen, ad::slice_rows(inputs, t * B, (t + 1) * B), zc), state);
    hs.push_back(state.h);
  }
  auto logits = ad::matmul(ad::concat(hs, 0), gen.out_weight) + gen.out_bias;
  TeacherForced out;
  out.steps = S;
  out.log_probs = ad::log_softmax(logits);
  std::vector<double> pick(S * B * V, 0.0);
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      if (t + 1 < batch.lengths[b]) pick[(t * B + b) * V + static_cast<std::size_t>(targets[t * B + b])] = 1.0;
    }
  }
  out.token_logp = ad::sum_cols(out.log_probs * Tensor::from({S * B, V}, std::move(pick)));
  return out;
}

SoftSequence decode_soft(const GeneratorParams& gen, const LatentCode& code, double tau, std::size_t steps) {
  check_code(code);
  if (!(tau > 0.0)) throw std::invalid_argument("decode_soft: temperature must be positive, got " + std::to_string(tau));
  if (steps < 1) throw std::invalid_argument("decode_soft: need at least one step");
  const std::size_t B = code.batch();
  const auto zc = ad::concat({code.z, code.c}, 1);
  const auto emb = masked_embedding(gen.embedding);
  auto input = ad::row_gather(emb, std::vector<int>(B, text::kBos));
  auto state = initial_state(gen, zc);
  std::vector<Tensor> rows;
  rows.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    state = lstm_step(gen.lstm, step_input(gen, input, zc), state);
    auto p = ad::softmax(ad::matmul(state.h, gen.out_weight) + gen.out_bias, tau);
    rows.push_back(p);
    if (t + 1 < steps) input = ad::matmul(p, emb);
  }
  SoftSequence seq;
  seq.rows = ad::concat(rows, 0);
  seq.steps = steps;
  seq.batch = B;
  // A row ends at its first step whose most likely token is EOS.
  seq.lengths.assign(B, steps);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double* p = rows[t].values().data() + b * rows[t].cols();
      if (std::max_element(p, p + rows[t].cols()) - p == text::kEos) {
        seq.lengths[b] = t + 1;
        break;
      }
    }
  }
  return seq;
}

std::vector<text::TokenSequence> decode_sample(const GeneratorParams& gen, const LatentCode& code, double tau,
                                               std::size_t max_steps, util::Rng& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("decode_sample: temperature must be positive");
  return rollout(gen, code, tau, max_steps,
                 [&rng](const double* p, std::size_t V) { return static_cast<int>(rng.categorical(p, V)); });
}

std::vector<text::TokenSequence> decode_greedy(const GeneratorParams& gen, const LatentCode& code,
                                               std::size_t max_steps) {
  return rollout(gen, code, 1.0, max_steps, [](const double* p, std::size_t V) {
    return static_cast<int>(std::max_element(p, p + V) - p);
  });
}

Tensor discriminate_log(const DiscriminatorParams& disc, const SoftSequence& seq) {
  const std::size_t S = seq.steps, B = seq.batch;
  if (seq.rows.rows() != S * B || seq.lengths.size() != B) {
    throw ad::ShapeError("discriminate: sequence rows " + ad::shape_str(seq.rows.shape()) + " do not hold " +
                         std::to_string(S) + " steps of batch " + std::to_string(B));
  }
  auto emb = ad::matmul(seq.rows, masked_embedding(disc.embedding));
  std::vector<Tensor> pooled;
  for (std::size_t i = 0; i < disc.windows.size(); ++i) {
    auto windows = ad::unfold_windows(emb, S, B, disc.windows[i], seq.lengths);
    auto act = ad::tanh(ad::matmul(windows, disc.conv_weight[i]) + disc.conv_bias[i]);
    pooled.push_back(ad::masked_max_over_time(act, S, B, seq.lengths));
  }
  auto logits = ad::matmul(ad::concat(pooled, 1), disc.head_weight) + disc.head_bias;
  if (logits.cols() != disc.categories) {
    throw ad::ShapeError("discriminator head has " + std::to_string(logits.cols()) + " outputs, attribute " +
                         disc.attribute + " has " + std::to_string(disc.categories) + " categories");
  }
  return ad::log_softmax(logits);
}

Tensor discriminate(const DiscriminatorParams& disc, const SoftSequence& seq) {
  return ad::exp(discriminate_log(disc, seq));
}

Tensor gaussian_logdensity(const Gaussian& q, const Tensor& z) {
  if (z.shape() != q.mu.shape()) {
    throw ad::ShapeError("gaussian_logdensity: z " + ad::shape_str(z.shape()) + " vs mu " + ad::shape_str(q.mu.shape()));
  }
  const double d = static_cast<double>(z.cols());
  auto diff = z - q.mu;
  auto quad = diff * diff * ad::exp(-q.logvar);
  auto ld = ad::add_scalar(ad::sum_cols(q.logvar + quad) * -0.5, -0.5 * d * std::log(2.0 * std::numbers::pi));
  for (double v : ld.values()) {
    if (!std::isfinite(v)) throw std::domain_error("encoder log-density is not finite");
  }
  return ld;
}

Tensor encoder_logdensity(const EncoderParams& enc, const Tensor& z, const SoftSequence& seq) {
  return gaussian_logdensity(encode(enc, seq), z);
}

}  // namespace ctg::model
