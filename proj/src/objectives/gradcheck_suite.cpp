// SPDX-License-Identifier: Apache-2.0
#include "ctg/objectives/gradcheck_suite.hpp"

#include <chrono>
#include <functional>

#include "ctg/objectives/losses.hpp"
#include "ctg/text/vocabulary.hpp"

namespace ctg::obj {

model::ModelDims micro_dims() {
  model::ModelDims d;
  d.vocab = 12;
  d.d_emb = 8;
  d.d_hid = 8;
  d.d_z = 4;
  d.attributes = {{"sentiment", 2}};
  d.disc_filters = 4;
  d.disc_windows = {2, 3};
  d.init_scale = 1.0;
  return d;
}

namespace {

std::vector<ad::Parameter> concat_params(std::vector<ad::Parameter> a, const std::vector<ad::Parameter>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double eps) {
  const auto dims = micro_dims();
  const std::size_t max_len = kMicroSteps - 1;
  auto m = model::Model::init(dims, seed);
  util::Rng rng = util::Rng::derive(seed, "gradcheck.data", 0);

  std::vector<text::LabeledExample> examples;
  for (std::size_t i = 0; i < 4; ++i) {
    text::LabeledExample ex;
    const std::size_t n = 2 + rng.below(max_len - 1);
    for (std::size_t t = 0; t < n; ++t) {
      ex.tokens.push_back(static_cast<int>(text::kNumReserved + rng.below(dims.vocab - text::kNumReserved)));
    }
    ex.labels["sentiment"] = static_cast<int>(i % 2);
    examples.push_back(std::move(ex));
  }
  const auto batch = text::make_batch(examples, max_len);
  const auto vae_noise = draw_vae_noise(m, batch, CodeSource::kDiscriminator, rng);
  const GeneratorNoise gen_noise{vae_noise, model::sample_prior(dims, 4, rng)};
  const auto sleep = draw_sleep_sample(m, 4, max_len, rng);

  LossWeights w;
  const double tau = 0.5;
  const double kl_weight = 0.7;

  const auto g = m.generator.parameters();
  const auto e = m.encoder.parameters();
  const auto d = m.discriminators[0].parameters();

  struct Spec {
    std::string loss;
    std::vector<std::string> groups;
    std::vector<ad::Parameter> params;
    std::function<ad::Tensor()> fn;
  };
  const std::vector<Spec> specs = {
      {"vae", {"generator", "encoder"}, concat_params(g, e),
       [&] { return loss_vae(m, batch, kl_weight, vae_noise).value; }},
      {"attr_c", {"generator"}, g, [&] { return loss_attr_c(m, gen_noise.prior, tau, kMicroSteps); }},
      {"attr_z", {"generator"}, g, [&] { return loss_attr_z(m, gen_noise.prior, tau, kMicroSteps); }},
      {"generator", {"generator"}, g,
       [&] { return loss_generator(m, batch, gen_noise, kl_weight, tau, kMicroSteps, w).value; }},
      {"disc_supervised", {"discriminator"}, d, [&] { return loss_disc_supervised(m.discriminators[0], batch); }},
      {"disc_unsupervised", {"discriminator"}, d, [&] { return loss_disc_unsupervised(m, 0, sleep, w).value; }},
      {"discriminator", {"discriminator"}, d, [&] { return loss_discriminator(m, 0, batch, sleep, w).value; }},
  };

  std::vector<GradCheckCase> out;
  for (const auto& s : specs) {
    const auto start = std::chrono::steady_clock::now();
    GradCheckCase c{s.loss, s.groups, ad::gradient_check(s.fn, s.params, eps), 0.0};
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ctg::obj
