// SPDX-License-Identifier: Apache-2.0
#include "ctg/objectives/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "ctg/ad/ops.hpp"

namespace ctg::obj {

using ad::Tensor;

void LossWeights::validate() const {
  for (double v : {lambda_c, lambda_z, lambda_u, beta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("balancing weights must be nonnegative");
  }
  if (kl_anneal_steps < 1 || tau_decay_steps < 1) throw std::invalid_argument("schedule lengths must be positive");
  if (!(tau_end > 0.0) || !(tau_start >= tau_end)) {
    throw std::invalid_argument("temperature schedule needs tau_start >= tau_end > 0");
  }
}

double anneal_kl_weight(std::uint64_t step, const LossWeights& w) {
  if (step >= w.kl_anneal_steps) return 1.0;
  return static_cast<double>(step) / static_cast<double>(w.kl_anneal_steps);
}

double anneal_temperature(std::uint64_t step, const LossWeights& w) {
  if (step >= w.tau_decay_steps) return w.tau_end;
  const double frac = static_cast<double>(step) / static_cast<double>(w.tau_decay_steps);
  return w.tau_start + (w.tau_end - w.tau_start) * frac;
}

Tensor kl_gaussian(const model::Gaussian& q) {
  auto per_dim = q.mu * q.mu + ad::exp(q.logvar) - q.logvar;
  auto per_example = ad::add_scalar(ad::sum_cols(per_dim), -static_cast<double>(q.mu.cols()));
  return ad::mean(per_example) * 0.5;
}

Tensor entropy(const Tensor& log_probs) { return -ad::sum_cols(ad::exp(log_probs) * log_probs); }

namespace {

// Picks log_probs[b, labels[b]] and returns the batch mean.
Tensor mean_label_logp(const Tensor& log_probs, const std::vector<int>& labels, const std::string& attribute) {
  const std::size_t B = log_probs.rows(), K = log_probs.cols();
  if (labels.size() != B) throw ad::ShapeError("label count does not match batch");
  std::vector<double> pick(B * K, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= K) {
      throw std::out_of_range("label " + std::to_string(labels[b]) + " outside the " + std::to_string(K) +
                              " categories of " + attribute);
    }
    pick[b * K + static_cast<std::size_t>(labels[b])] = 1.0;
  }
  return ad::mean(ad::sum_cols(log_probs * Tensor::from({B, K}, std::move(pick))));
}

}  // namespace

VaeNoise draw_vae_noise(const model::Model& m, const text::Batch& x, CodeSource source, util::Rng& rng) {
  VaeNoise n;
  std::vector<double> eps(x.size * m.dims.d_z);
  for (auto& e : eps) e = rng.normal();
  n.eps = Tensor::from({x.size, m.dims.d_z}, std::move(eps));
  if (source == CodeSource::kPrior) {
    for (const auto& a : m.dims.attributes) {
      std::vector<int> cats(x.size);
      for (auto& k : cats) k = static_cast<int>(rng.below(a.categories));
      n.categories.push_back(std::move(cats));
    }
  } else {
    const auto seq = model::one_hot_sequence(x, m.dims.vocab);
    for (const auto& d : m.discriminators) {
      const auto probs = model::discriminate(d.frozen(), seq);
      std::vector<int> cats(x.size);
      for (std::size_t b = 0; b < x.size; ++b) {
        cats[b] = static_cast<int>(rng.categorical(probs.values().data() + b * d.categories, d.categories));
      }
      n.categories.push_back(std::move(cats));
    }
  }
  return n;
}

Loss loss_vae(const model::Model& m, const text::Batch& x, double kl_weight, const VaeNoise& noise) {
  if (!(kl_weight >= 0.0 && kl_weight <= 1.0)) {
    throw std::invalid_argument("kl_weight must lie in [0, 1], got " + std::to_string(kl_weight));
  }
  const auto q = model::encode(m.encoder, x);
  const model::LatentCode code{model::reparameterize(q, noise.eps), model::code_from_categories(m.dims, noise.categories)};
  const auto tf = model::decode_teacher_forced(m.generator, code, x);
  auto nll = -(ad::sum(tf.token_logp) * (1.0 / static_cast<double>(x.size)));
  auto kl = kl_gaussian(q);
  Loss out;
  out.value = nll + kl * kl_weight;
  out.report.recon_nll = nll.item();
  out.report.kl = kl.item();
  out.report.vae = out.value.item();
  out.report.kl_weight = kl_weight;
  return out;
}

Tensor loss_attr_c(const model::Model& m, const model::PriorSample& prior, const model::SoftSequence& soft) {
  Tensor total;
  for (std::size_t a = 0; a < m.discriminators.size(); ++a) {
    const auto& d = m.discriminators[a];
    auto term = -mean_label_logp(model::discriminate_log(d.frozen(), soft), prior.categories[a], d.attribute);
    total = total.defined() ? total + term : term;
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

Tensor loss_attr_c(const model::Model& m, const model::PriorSample& prior, double tau, std::size_t steps) {
  return loss_attr_c(m, prior, model::decode_soft(m.generator, prior.code, tau, steps));
}

Tensor loss_attr_z(const model::Model& m, const model::PriorSample& prior, const model::SoftSequence& soft) {
  return -ad::mean(model::encoder_logdensity(m.encoder.frozen(), prior.code.z, soft));
}

Tensor loss_attr_z(const model::Model& m, const model::PriorSample& prior, double tau, std::size_t steps) {
  return loss_attr_z(m, prior, model::decode_soft(m.generator, prior.code, tau, steps));
}

GeneratorNoise draw_generator_noise(const model::Model& m, const text::Batch& x, util::Rng& rng) {
  GeneratorNoise n;
  n.vae = draw_vae_noise(m, x, CodeSource::kDiscriminator, rng);
  n.prior = model::sample_prior(m.dims, x.size, rng);
  return n;
}

Loss loss_generator(const model::Model& m, const text::Batch& x, const GeneratorNoise& noise, double kl_weight,
                    double tau, std::size_t steps, const LossWeights& w) {
  Loss out = loss_vae(m, x, kl_weight, noise.vae);
  const auto soft = model::decode_soft(m.generator, noise.prior.code, tau, steps);
  auto attr_c = loss_attr_c(m, noise.prior, soft);
  auto attr_z = loss_attr_z(m, noise.prior, soft);
  out.value = out.value + attr_c * w.lambda_c + attr_z * w.lambda_z;
  out.report.attr_c = attr_c.item();
  out.report.attr_z = attr_z.item();
  out.report.gen_total = out.value.item();
  out.report.tau = tau;
  return out;
}

Tensor loss_disc_supervised(const model::DiscriminatorParams& d, const text::Batch& labeled) {
  const auto labels = labeled.label_column(d.attribute);
  const auto seq = model::one_hot_sequence(labeled, d.embedding.rows());
  return -mean_label_logp(model::discriminate_log(d, seq), labels, d.attribute);
}

SleepSample draw_sleep_sample(const model::Model& m, std::size_t batch, std::size_t max_len, util::Rng& rng) {
  SleepSample s;
  s.prior = model::sample_prior(m.dims, batch, rng);
  s.sentences = model::decode_sample(m.generator, s.prior.code, 1.0, max_len, rng);
  return s;
}

Loss loss_disc_unsupervised(const model::Model& m, std::size_t attribute, const SleepSample& sleep,
                            const LossWeights& w) {
  const auto& d = m.discriminators.at(attribute);
  const auto seq = model::one_hot_sequence(sleep.sentences, m.dims.vocab);
  const auto logp = model::discriminate_log(d, seq);
  auto nll = -mean_label_logp(logp, sleep.prior.categories[attribute], d.attribute);
  auto h = ad::mean(entropy(logp));
  Loss out;
  out.value = nll + h * (w.reward_entropy ? -w.beta : w.beta);
  out.report.disc_unsup = out.value.item();
  out.report.disc_entropy = h.item();
  return out;
}

Loss loss_discriminator(const model::Model& m, std::size_t attribute, const text::Batch& labeled,
                        const SleepSample& sleep, const LossWeights& w) {
  auto sup = loss_disc_supervised(m.discriminators.at(attribute), labeled);
  Loss out = loss_disc_unsupervised(m, attribute, sleep, w);
  out.value = sup + out.value * w.lambda_u;
  out.report.disc_sup = sup.item();
  out.report.disc_total = out.value.item();
  return out;
}

}  // namespace ctg::obj
