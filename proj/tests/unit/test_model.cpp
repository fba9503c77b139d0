// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ctg/ad/ops.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/model/model.hpp"
#include "ctg/objectives/gradcheck_suite.hpp"
#include "ctg/text/sequence.hpp"

using namespace ctg;
using ad::Tensor;

namespace {

model::Model micro_model(std::uint64_t seed) { return model::Model::init(obj::micro_dims(), seed); }

text::Batch token_batch(const std::vector<text::TokenSequence>& seqs) {
  return text::make_batch(std::span<const text::TokenSequence>(seqs), 15);
}

void zero_heads(model::EncoderParams& e) {
  model::fill(e.mu_weight, 0.0);
  model::fill(e.mu_bias, 0.0);
  model::fill(e.logvar_weight, 0.0);
  model::fill(e.logvar_bias, 0.0);
}

}  // namespace

TEST_CASE("initialization is deterministic and clones do not alias") {
  const auto a = micro_model(3);
  const auto b = micro_model(3);
  const auto pa = a.all_parameters(), pb = b.all_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(std::vector<double>(pa[i].tensor.values().begin(), pa[i].tensor.values().end()) ==
          std::vector<double>(pb[i].tensor.values().begin(), pb[i].tensor.values().end()));
  }
  auto c = a.clone();
  model::fill(c.generator.out_bias, 9.0);
  CHECK(a.generator.out_bias[0] != 9.0);
}

TEST_CASE("encoder heads and determinism") {
  auto m = micro_model(1);
  const auto batch = token_batch({{4, 5, 6}, {4, 5, 6}, {7}});
  const auto q = model::encode(m.encoder, batch);
  for (std::size_t j = 0; j < m.dims.d_z; ++j) {
    CHECK(q.mu.at(0, j) == q.mu.at(1, j));
    CHECK(q.logvar.at(0, j) == q.logvar.at(1, j));
  }
  zero_heads(m.encoder);
  const auto z = model::encode(m.encoder, batch);
  for (double v : z.mu.values()) CHECK(v == 0.0);
  for (double v : z.logvar.values()) CHECK(v == 0.0);
}

TEST_CASE("encoder output is invariant to extra padding") {
  const auto m = micro_model(2);
  const auto alone = model::encode(m.encoder, token_batch({{4, 5}}));
  const auto padded = model::encode(m.encoder, token_batch({{4, 5}, {6, 7, 8, 9, 10, 11, 4, 5}}));
  for (std::size_t j = 0; j < m.dims.d_z; ++j) {
    CHECK(alone.mu.at(0, j) == padded.mu.at(0, j));
    CHECK(alone.logvar.at(0, j) == padded.logvar.at(0, j));
  }
}

TEST_CASE("reparameterization") {
  auto mu = Tensor::from({1, 2}, {0.5, -1.0}, true);
  auto lv = Tensor::from({1, 2}, {0.0, 0.0}, true);
  const model::Gaussian q{mu, lv};
  const auto z0 = model::reparameterize(q, Tensor::from({1, 2}, {0, 0}));
  CHECK(z0[0] == 0.5);
  CHECK(z0[1] == -1.0);
  const auto ze = model::reparameterize(q, Tensor::from({1, 2}, {std::numbers::e, 1.0}));
  CHECK(ze[0] == doctest::Approx(0.5 + std::numbers::e).epsilon(1e-15));

  auto mu1 = Tensor::from({1, 1}, {0.0}, true);
  auto lv1 = Tensor::from({1, 1}, {0.0}, true);
  ad::backward(ad::sum(model::reparameterize({mu1, lv1}, Tensor::from({1, 1}, {1.0}))));
  CHECK(lv1.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("teacher forcing scores real positions only") {
  const auto m = micro_model(4);
  const auto batch = token_batch({{4, 5, 6, 7}, {8}});
  util::Rng rng(1);
  const auto prior = model::sample_prior(m.dims, 2, rng);
  const auto tf = model::decode_teacher_forced(m.generator, prior.code, batch);
  double total = 0.0;
  for (std::size_t t = 0; t < tf.steps; ++t) {
    for (std::size_t b = 0; b < 2; ++b) {
      const double v = tf.token_logp[t * 2 + b];
      if (t + 1 >= batch.lengths[b]) CHECK(v == 0.0);
      else CHECK(v < 0.0);
      total += v;
    }
  }
  CHECK(std::isfinite(total));
  CHECK(total < 0.0);
}

TEST_CASE("soft decoding saturates on a wide logit gap") {
  auto m = micro_model(5);
  model::fill(m.generator.out_weight, 0.0);
  model::fill(m.generator.out_bias, 0.0);
  m.generator.out_bias.mutable_values()[7] = 30.0;
  util::Rng rng(2);
  const auto prior = model::sample_prior(m.dims, 3, rng);
  const auto soft = model::decode_soft(m.generator, prior.code, 1.0, 5);
  const std::size_t V = m.dims.vocab;
  CHECK(soft.rows.rows() == 15);
  for (std::size_t r = 0; r < soft.rows.rows(); ++r) {
    for (std::size_t v = 0; v < V; ++v) CHECK(std::abs(soft.rows.at(r, v) - (v == 7 ? 1.0 : 0.0)) < 1e-8);
  }
  CHECK_THROWS_AS(model::decode_soft(m.generator, prior.code, 0.0, 5), std::invalid_argument);
}

TEST_CASE("soft lengths stop at the first likely EOS") {
  auto m = micro_model(5);
  util::Rng rng(2);
  const auto prior = model::sample_prior(m.dims, 3, rng);
  model::fill(m.generator.out_weight, 0.0);
  model::fill(m.generator.out_bias, 0.0);
  m.generator.out_bias.mutable_values()[text::kEos] = 1.0;
  const auto stop = model::decode_soft(m.generator, prior.code, 1.0, 5);
  CHECK(stop.rows.rows() == 15);
  CHECK(stop.lengths == std::vector<std::size_t>{1, 1, 1});
  m.generator.out_bias.mutable_values()[text::kEos] = 0.0;
  m.generator.out_bias.mutable_values()[7] = 1.0;
  CHECK(model::decode_soft(m.generator, prior.code, 1.0, 5).lengths == std::vector<std::size_t>{5, 5, 5});
}

TEST_CASE("soft rows are distributions and match greedy decoding at low temperature") {
  auto m = micro_model(6);
  // Distinct logits: a bias ramp separates every pair of outputs.
  for (std::size_t v = 0; v < m.dims.vocab; ++v) m.generator.out_bias.mutable_values()[v] = 0.5 * v;
  util::Rng rng(3);
  const auto prior = model::sample_prior(m.dims, 4, rng);
  const auto warm = model::decode_soft(m.generator, prior.code, 1.3, 5);
  for (std::size_t r = 0; r < warm.rows.rows(); ++r) {
    double s = 0.0;
    for (std::size_t v = 0; v < m.dims.vocab; ++v) s += warm.rows.at(r, v);
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  const auto cold = model::decode_soft(m.generator, prior.code, 0.01, 5);
  const auto greedy = model::decode_greedy(m.generator, prior.code, 5);
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t t = 0; t < greedy[b].size(); ++t) {
      const std::size_t r = t * 4 + b;
      std::size_t arg = 0;
      for (std::size_t v = 1; v < m.dims.vocab; ++v) {
        if (cold.rows.at(r, v) > cold.rows.at(r, arg)) arg = v;
      }
      CHECK(cold.rows.at(r, arg) >= 0.99);
      CHECK(static_cast<int>(arg) == greedy[b][t]);
    }
  }
}

TEST_CASE("sampling") {
  auto m = micro_model(7);
  util::Rng r0(9);
  const auto prior = model::sample_prior(m.dims, 8, r0);
  util::Rng a(4), b(4);
  CHECK(model::decode_sample(m.generator, prior.code, 1.0, 6, a) ==
        model::decode_sample(m.generator, prior.code, 1.0, 6, b));

  auto eos = m.clone();
  model::fill(eos.generator.out_weight, 0.0);
  model::fill(eos.generator.out_bias, 0.0);
  eos.generator.out_bias.mutable_values()[text::kEos] = 60.0;
  util::Rng c(5);
  for (const auto& s : model::decode_sample(eos.generator, prior.code, 1.0, 6, c)) CHECK(s.empty());
}

TEST_CASE("single-step sample frequencies follow the softmax") {
  const auto m = micro_model(8);
  const std::size_t n = 100000;
  util::Rng r0(1);
  auto one = model::sample_prior(m.dims, 1, r0);
  std::vector<double> z(n * m.dims.d_z), c(n * m.dims.code_dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m.dims.d_z; ++j) z[i * m.dims.d_z + j] = one.code.z[j];
    for (std::size_t j = 0; j < m.dims.code_dim(); ++j) c[i * m.dims.code_dim() + j] = one.code.c[j];
  }
  const model::LatentCode code{Tensor::from({n, m.dims.d_z}, z), Tensor::from({n, m.dims.code_dim()}, c)};
  util::Rng rng(12);
  const auto samples = model::decode_sample(m.generator, code, 1.0, 1, rng);
  std::vector<double> freq(m.dims.vocab, 0.0);
  for (const auto& s : samples) freq[s.empty() ? text::kEos : static_cast<std::size_t>(s[0])] += 1.0 / n;
  const auto p = model::decode_soft(m.generator, one.code, 1.0, 1);
  for (std::size_t v = 0; v < m.dims.vocab; ++v) CHECK(std::abs(freq[v] - p.rows[v]) < 0.01);
}

TEST_CASE("discriminator outputs") {
  auto m = micro_model(9);
  const auto batch = token_batch({{4, 5, 6}, {7, 8}});
  const auto hard = model::one_hot_sequence(batch, m.dims.vocab);
  const auto soft = model::SoftSequence{hard.rows.detach(), hard.steps, hard.batch, hard.lengths};
  const auto& d = m.discriminators[0];
  const auto ph = model::discriminate(d, hard);
  const auto ps = model::discriminate(d, soft);
  for (std::size_t i = 0; i < ph.size(); ++i) CHECK(ph[i] == ps[i]);
  for (std::size_t b = 0; b < 2; ++b) CHECK(std::abs(ph.at(b, 0) + ph.at(b, 1) - 1.0) < 1e-9);

  model::fill(m.discriminators[0].head_weight, 0.0);
  model::fill(m.discriminators[0].head_bias, 0.0);
  const auto u = model::discriminate(m.discriminators[0], hard);
  for (double v : u.values()) CHECK(v == 0.5);
}

TEST_CASE("encoder log-density at fixed points") {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const model::Gaussian q1{Tensor::from({1, 1}, {0.25}), Tensor::from({1, 1}, {0.0})};
  CHECK(model::gaussian_logdensity(q1, Tensor::from({1, 1}, {1.25}))[0] ==
        doctest::Approx(-1.4189385332046727).epsilon(1e-14));
  const model::Gaussian q4{Tensor::from({1, 4}, {1, 2, 3, 4}), Tensor::from({1, 4}, {0, 0, 0, 0})};
  CHECK(model::gaussian_logdensity(q4, Tensor::from({1, 4}, {1, 2, 3, 4}))[0] ==
        doctest::Approx(-2.0 * log2pi).epsilon(1e-14));

  auto m = micro_model(10);
  zero_heads(m.encoder);
  const auto seq = model::one_hot_sequence(token_batch({{4, 5}}), m.dims.vocab);
  const auto lp = model::encoder_logdensity(m.encoder, Tensor::zeros({1, m.dims.d_z}), seq);
  CHECK(lp[0] == doctest::Approx(-0.5 * static_cast<double>(m.dims.d_z) * log2pi).epsilon(1e-14));
}

TEST_CASE("latent code validation") {
  const auto dims = obj::micro_dims();
  CHECK_THROWS_AS(model::code_from_categories(dims, {{0, 2}}), std::out_of_range);
  CHECK_THROWS_AS(model::code_from_categories(dims, {}), std::invalid_argument);
  const auto c = model::code_from_categories(dims, {{1, 0}});
  CHECK(c.at(0, 1) == 1.0);
  CHECK(c.at(1, 0) == 1.0);
}
