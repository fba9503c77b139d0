// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctg/ad/adam.hpp"
#include "ctg/ad/gradcheck.hpp"
#include "ctg/ad/ops.hpp"
#include "ctg/ad/tensor.hpp"
#include "ctg/util/rng.hpp"

using namespace ctg;
using ad::Tensor;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("softmax with temperature on fixed logits") {
  const auto u = ad::softmax(Tensor::from({1, 3}, {0, 0, 0}), 1.0);
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // e^2 / (e^2 + 1), evaluated once with a calculator and frozen here.
  const auto p = ad::softmax(Tensor::from({1, 2}, {2, 0}), 1.0);
  CHECK(p[0] == doctest::Approx(0.8807970779778825).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.1192029220221175).epsilon(1e-13));
}

TEST_CASE("softmax rejects non-positive temperature") {
  const auto x = Tensor::from({1, 2}, {1, 2});
  CHECK_THROWS_AS(ad::softmax(x, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ad::softmax(x, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ad::log_softmax(x, 0.0), std::invalid_argument);
}

TEST_CASE("temperature equals pre-scaled logits in value and gradient") {
  util::Rng rng(5);
  std::vector<double> raw(12);
  for (auto& v : raw) v = rng.normal();
  const double tau = 0.37;
  auto a = Tensor::from({3, 4}, raw, true);
  auto b = Tensor::from({3, 4}, raw, true);
  const auto w = Tensor::from({3, 4}, {1, -2, 3, 0.5, 2, 1, -1, 0, 0.25, 4, -3, 1});
  const auto pa = ad::softmax(a, tau);
  const auto pb = ad::softmax(b * (1.0 / tau), 1.0);
  ad::backward(ad::sum(pa * w));
  ad::backward(ad::sum(pb * w));
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-14));
    CHECK(a.grad()[i] == doctest::Approx(b.grad()[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul by identity is exact") {
  const auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto a = Tensor::from({3, 2}, {1.5, -2, 3.25, 4, 0.125, -7});
  CHECK(to_vec(ad::matmul(eye, a).values()) == to_vec(a.values()));
}

TEST_CASE("shape mismatches and invalid logs are rejected") {
  const auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(ad::add(a, b), ad::ShapeError);
  CHECK_THROWS_AS(ad::matmul(a, a), ad::ShapeError);
  CHECK_THROWS_WITH_AS(ad::matmul(a, a), doctest::Contains("[2,3]"), ad::ShapeError);
  CHECK_THROWS_AS(ad::log(Tensor::from({1, 2}, {1, 0})), std::domain_error);
  CHECK_THROWS_AS(ad::log(Tensor::from({1, 1}, {-1})), std::domain_error);
}

TEST_CASE("backward of a sum of squares") {
  auto x = Tensor::from({1, 3}, {1, 2, 3}, true);
  ad::backward(ad::sum(x * x));
  CHECK(to_vec(x.grad()) == std::vector<double>{2, 4, 6});
}

TEST_CASE("gradients accumulate into leaves reused in one expression") {
  auto x = Tensor::from({1, 1}, {3}, true);
  ad::backward(x * x * x + x);
  CHECK(x.grad()[0] == doctest::Approx(28.0).epsilon(1e-15));
}

TEST_CASE("Adam takes a descent step") {
  auto w = Tensor::from({1, 1}, {1.0}, true);
  std::vector<ad::Parameter> params{{"w", w}};
  auto state = ad::make_optimizer_state(params, {0.1});
  ad::backward(w * w);
  ad::adam_step(params, state);
  CHECK(w[0] < 1.0);
  CHECK(state.step == 1);
}

TEST_CASE("Adam with a zero gradient leaves parameters and advances the counter") {
  auto w = Tensor::from({1, 2}, {0.5, -0.5}, true);
  std::vector<ad::Parameter> params{{"w", w}};
  auto state = ad::make_optimizer_state(params, {0.1});
  ad::backward(ad::sum(w * 0.0));
  ad::adam_step(params, state);
  CHECK(to_vec(w.values()) == std::vector<double>{0.5, -0.5});
  CHECK(state.step == 1);
}

TEST_CASE("Adam rejects a parameter without gradient") {
  auto w = Tensor::from({1, 1}, {1.0}, true);
  std::vector<ad::Parameter> params{{"w", w}};
  auto state = ad::make_optimizer_state(params, {});
  CHECK_THROWS_WITH_AS(ad::adam_step(params, state), doctest::Contains("'w'"), std::invalid_argument);
}

TEST_CASE("Adam on (w-3)^2 matches the scalar recursion") {
  auto w = Tensor::from({1, 1}, {0.0}, true);
  std::vector<ad::Parameter> params{{"w", w}};
  auto state = ad::make_optimizer_state(params, {0.1});
  double sw = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    w.zero_grad();
    auto d = w + (-3.0);
    ad::backward(d * d);
    ad::adam_step(params, state);
    const double g = 2.0 * (sw - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    sw -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(w[0] == sw);
  // Frozen from the recursion above.
  CHECK(w[0] == doctest::Approx(3.0000530297387056).epsilon(1e-13));
  CHECK(std::abs(w[0] - 3.0) < 0.01);
}

TEST_CASE("gradient norm clipping") {
  auto a = Tensor::from({1, 2}, {0, 0}, true);
  auto b = Tensor::from({1, 1}, {0}, true);
  std::vector<ad::Parameter> params{{"a", a}, {"b", b}};
  ad::backward(ad::sum(a * Tensor::from({1, 2}, {3, 0})) + b * 4.0);
  CHECK(ad::clip_grad_norm(params, 0.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == 3.0);
  CHECK(ad::clip_grad_norm(params, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == 3.0);
  CHECK(ad::clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("finite differences are exact on a quadratic") {
  auto x = Tensor::from({2, 2}, {0.3, -1.2, 2.0, 0.7}, true);
  const auto q = Tensor::from({2, 2}, {2, 1, 1, 3});
  auto loss = [&] { return ad::sum(ad::matmul(x, q) * x); };
  const auto r = ad::gradient_check(loss, {{"x", x}}, 1e-5);
  CHECK(r.entries_checked == 4);
  CHECK(r.max_relative_error < 1e-8);
}

TEST_CASE("finite differences agree through every nonlinearity") {
  util::Rng rng(11);
  std::vector<double> raw(6);
  for (auto& v : raw) v = rng.normal();
  auto x = Tensor::from({2, 3}, raw, true);
  auto loss = [&] {
    auto h = ad::tanh(x) + ad::sigmoid(x * 2.0) + ad::exp(x * 0.5);
    auto p = ad::softmax(h, 0.7);
    return ad::mean(ad::log(p) * ad::log_softmax(h, 1.3)) + ad::sum(ad::concat({x, h}, 0) * 0.1);
  };
  CHECK(ad::gradient_check(loss, {{"x", x}}, 1e-5).max_relative_error < 1e-6);
}
