// SPDX-License-Identifier: Apache-2.0
#include "ctg/ad/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ctg::ad {

GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn, const std::vector<Parameter>& params,
                               double eps) {
  for (const auto& p : params) Tensor(p.tensor).zero_grad();
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw std::domain_error("gradient_check: loss is not finite at the base point");
  backward(loss);

  GradCheckResult result;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                : std::vector<double>(t.size(), 0.0);
    auto w = t.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      auto eval = [&](double delta) {
        w[i] = orig + delta;
        const double v = loss_fn().item();
        w[i] = orig;
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "gradient_check: non-finite loss when perturbing " << p.name << "[" << i << "] by " << delta;
          throw std::domain_error(os.str());
        }
        return v;
      };
      const double plus = eval(eps);
      const double minus = eval(-eps);
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  for (const auto& p : params) Tensor(p.tensor).zero_grad();
  return result;
}

}  // namespace ctg::ad
