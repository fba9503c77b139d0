// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ctg/ad/adam.hpp"

namespace ctg::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares backward() against central differences for every entry of
// `params`: |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// `loss_fn` must rebuild the loss from scratch and be deterministic.
GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn, const std::vector<Parameter>& params,
                               double eps = 1e-5);

}  // namespace ctg::ad
