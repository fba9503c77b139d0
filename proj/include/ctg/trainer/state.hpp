// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctg/ad/adam.hpp"
#include "ctg/model/model.hpp"
#include "ctg/text/vocabulary.hpp"
#include "ctg/trainer/config.hpp"

namespace ctg::train {

// Everything a run needs to continue bit-exactly. global_step counts
// pretraining steps plus joint cycles; joint_step counts joint cycles only.
struct TrainState {
  TrainConfig config;
  text::Vocabulary vocab;
  model::Model model;
  ad::OptimizerState opt_generator;
  ad::OptimizerState opt_encoder;
  std::vector<ad::OptimizerState> opt_discriminators;  // config attribute order
  std::uint64_t global_step = 0;
  std::uint64_t joint_step = 0;
  double best_heldout = std::numeric_limits<double>::infinity();
  std::uint64_t stale_evaluations = 0;
  bool stopped_early = false;

  std::uint64_t pretrain_steps_done() const { return global_step - joint_step; }
};

TrainState init_state(const TrainConfig& config, const text::Vocabulary& vocab);

}  // namespace ctg::train
