// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks of every composite loss on a tiny model with all
// noise drawn once up front.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctg/ad/gradcheck.hpp"
#include "ctg/model/model.hpp"

namespace ctg::obj {

// vocab 12, d_emb = d_hid = 8, d_z = 4, one binary attribute, weights
// uniform in [-1, 1] so no gradient entry sits at rounding level.
model::ModelDims micro_dims();
inline constexpr std::size_t kMicroSteps = 5;
// Below this step, rounding in the loss swamps gradients of order 1e-9.
inline constexpr double kMicroEps = 3e-5;

struct GradCheckCase {
  std::string loss;
  std::vector<std::string> groups;  // parameter groups that were perturbed
  ad::GradCheckResult result;
  double seconds = 0.0;
};

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, double eps = kMicroEps);

}  // namespace ctg::obj
