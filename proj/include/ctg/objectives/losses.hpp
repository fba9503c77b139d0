// SPDX-License-Identifier: Apache-2.0
//
// Generator-side and discriminator-side objectives. All batch losses are
// means over examples, in nats. Every random input (reparameterization noise,
// code samples, sleep-phase sentences) is drawn by an explicit draw_* helper
// and passed in, so each loss is a deterministic function of its arguments.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctg/ad/tensor.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/model/model.hpp"
#include "ctg/text/sequence.hpp"
#include "ctg/util/rng.hpp"

namespace ctg::obj {

struct LossWeights {
  double lambda_c = 0.1;
  double lambda_z = 0.1;
  double lambda_u = 0.1;
  double beta = 0.1;
  std::uint64_t kl_anneal_steps = 1000;
  double tau_start = 1.0;
  double tau_end = 0.01;
  std::uint64_t tau_decay_steps = 1000;
  // Minimize -log q - beta * H (rewards entropy) instead of -log q + beta * H.
  bool reward_entropy = false;

  void validate() const;
};

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct LossReport {
  double recon_nll = kNotComputed;
  double kl = kNotComputed;
  double vae = kNotComputed;
  double attr_c = kNotComputed;
  double attr_z = kNotComputed;
  double gen_total = kNotComputed;
  double disc_sup = kNotComputed;
  double disc_unsup = kNotComputed;
  double disc_entropy = kNotComputed;
  double disc_total = kNotComputed;
  double kl_weight = kNotComputed;
  double tau = kNotComputed;
};

struct Loss {
  ad::Tensor value;
  LossReport report;
};

// min(1, step / kl_anneal_steps)
double anneal_kl_weight(std::uint64_t step, const LossWeights& w);
// Linear from tau_start to tau_end over tau_decay_steps, then tau_end.
double anneal_temperature(std::uint64_t step, const LossWeights& w);

// Batch mean of KL(N(mu, sigma^2) || N(0, I)).
ad::Tensor kl_gaussian(const model::Gaussian& q);
// Shannon entropy in nats of each row of a [B, K] log-probability matrix, [B, 1].
ad::Tensor entropy(const ad::Tensor& log_probs);

enum class CodeSource {
  kPrior,          // c ~ p(c), used while initializing the VAE
  kDiscriminator,  // c ~ q_D(c|x) with no gradient into the discriminator
};

struct VaeNoise {
  ad::Tensor eps;                            // [B, d_z]
  std::vector<std::vector<int>> categories;  // [attribute][example]
};

// Draws eps row-major, then one category per attribute per example.
VaeNoise draw_vae_noise(const model::Model& m, const text::Batch& x, CodeSource source, util::Rng& rng);

// kl_weight * KL + masked reconstruction NLL. kl_weight must lie in [0, 1].
Loss loss_vae(const model::Model& m, const text::Batch& x, double kl_weight, const VaeNoise& noise);

// Sum over attributes of -mean log q_D(c_a | soft). Discriminators are frozen.
ad::Tensor loss_attr_c(const model::Model& m, const model::PriorSample& prior, const model::SoftSequence& soft);
ad::Tensor loss_attr_c(const model::Model& m, const model::PriorSample& prior, double tau, std::size_t steps);
// -mean log q_E(z | soft). The encoder is frozen.
ad::Tensor loss_attr_z(const model::Model& m, const model::PriorSample& prior, const model::SoftSequence& soft);
ad::Tensor loss_attr_z(const model::Model& m, const model::PriorSample& prior, double tau, std::size_t steps);

struct GeneratorNoise {
  VaeNoise vae;
  model::PriorSample prior;
};

// Draw order: VAE noise (code from the discriminators), then the prior sample.
GeneratorNoise draw_generator_noise(const model::Model& m, const text::Batch& x, util::Rng& rng);

// L_VAE + lambda_c * L_attr_c + lambda_z * L_attr_z with one soft rollout of
// `steps` steps at temperature tau shared by both attribute terms.
Loss loss_generator(const model::Model& m, const text::Batch& x, const GeneratorNoise& noise, double kl_weight,
                    double tau, std::size_t steps, const LossWeights& w);

// -mean log q_D(c_L | x_L) for the batch labels of the discriminator's attribute.
ad::Tensor loss_disc_supervised(const model::DiscriminatorParams& d, const text::Batch& labeled);

struct SleepSample {
  model::PriorSample prior;
  std::vector<text::TokenSequence> sentences;
};

// Prior sample, then ancestral sampling from the frozen generator at tau = 1.
SleepSample draw_sleep_sample(const model::Model& m, std::size_t batch, std::size_t max_len, util::Rng& rng);

// Mean over samples of -log q_D(c|x) + beta * H(q_D(.|x)); report fills
// disc_unsup and disc_entropy (mean H).
Loss loss_disc_unsupervised(const model::Model& m, std::size_t attribute, const SleepSample& sleep,
                            const LossWeights& w);

// L_s + lambda_u * L_u for one attribute's discriminator.
Loss loss_discriminator(const model::Model& m, std::size_t attribute, const text::Batch& labeled,
                        const SleepSample& sleep, const LossWeights& w);

}  // namespace ctg::obj
