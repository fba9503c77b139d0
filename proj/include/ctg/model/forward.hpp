// SPDX-License-Identifier: Apache-2.0
//
// Forward passes. Sequences of token distributions are stored time-major:
// row t * batch + b of a SoftSequence is step t of example b.
#pragma once

#include <cstddef>
#include <vector>

#include "ctg/ad/tensor.hpp"
#include "ctg/model/model.hpp"
#include "ctg/text/sequence.hpp"
#include "ctg/util/rng.hpp"

namespace ctg::model {

// Row-stochastic [steps * batch, V] matrix. One-hot rows encode real tokens.
struct SoftSequence {
  ad::Tensor rows;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> lengths;  // real rows per example
};

// One-hot rows for x_1 .. x_n EOS of every example (BOS dropped).
SoftSequence one_hot_sequence(const text::Batch& batch, std::size_t vocab);
// Same for bare token sequences, each followed by EOS.
SoftSequence one_hot_sequence(const std::vector<text::TokenSequence>& seqs, std::size_t vocab);

// z: [B, d_z]; c: [B, d_c] made of one one-hot block per attribute.
struct LatentCode {
  ad::Tensor z;
  ad::Tensor c;
  std::size_t batch() const { return z.rows(); }
};

// Concatenated one-hot blocks; categories[a][b] is example b's class for attribute a.
ad::Tensor code_from_categories(const ModelDims& dims, const std::vector<std::vector<int>>& categories);

// z ~ N(0, I) drawn row-major, then categories attribute by attribute,
// example by example, uniformly.
struct PriorSample {
  LatentCode code;
  std::vector<std::vector<int>> categories;
};
PriorSample sample_prior(const ModelDims& dims, std::size_t batch, util::Rng& rng);

struct Gaussian {
  ad::Tensor mu;      // [B, d_z]
  ad::Tensor logvar;  // [B, d_z]
};

// q_E(z|x) from the encoder's state after the last real token (EOS).
Gaussian encode(const EncoderParams& enc, const text::Batch& batch);
Gaussian encode(const EncoderParams& enc, const SoftSequence& seq);

// z = mu + exp(logvar / 2) * eps with caller-supplied noise.
ad::Tensor reparameterize(const Gaussian& q, const ad::Tensor& eps);

struct TeacherForced {
  ad::Tensor log_probs;    // [steps * B, V] next-token log-probabilities
  ad::Tensor token_logp;   // [steps * B, 1] gold log-likelihood, 0 at padded steps
  std::size_t steps = 0;
};

// Reads BOS x_1 .. x_n and scores x_1 .. x_n EOS.
TeacherForced decode_teacher_forced(const GeneratorParams& gen, const LatentCode& code, const text::Batch& batch);

// Differentiable rollout for exactly `steps` steps: each row is
// softmax(o_t / tau) and the next input is that row times the embedding.
// lengths[b] stops at the first row whose argmax is EOS, so readers mask
// what follows; the rows themselves are always `steps` long.
SoftSequence decode_soft(const GeneratorParams& gen, const LatentCode& code, double tau, std::size_t steps);

// Ancestral sampling from softmax(o_t / tau) until EOS or max_steps tokens.
// One uniform per live example per step, in batch order. EOS is not returned.
std::vector<text::TokenSequence> decode_sample(const GeneratorParams& gen, const LatentCode& code, double tau,
                                               std::size_t max_steps, util::Rng& rng);

// Argmax decoding (lowest id on ties) with the same stopping rule.
std::vector<text::TokenSequence> decode_greedy(const GeneratorParams& gen, const LatentCode& code,
                                               std::size_t max_steps);

// Class log-probabilities log q_D(c|x), [B, K].
ad::Tensor discriminate_log(const DiscriminatorParams& disc, const SoftSequence& seq);
// Class probabilities q_D(c|x), [B, K].
ad::Tensor discriminate(const DiscriminatorParams& disc, const SoftSequence& seq);

// Per-example log q_E(z | x) including the -(d_z/2) log 2pi constant, [B, 1].
ad::Tensor encoder_logdensity(const EncoderParams& enc, const ad::Tensor& z, const SoftSequence& seq);

// Same Gaussian log-density for an already computed posterior.
ad::Tensor gaussian_logdensity(const Gaussian& q, const ad::Tensor& z);

}  // namespace ctg::model
