// SPDX-License-Identifier: Apache-2.0
#include "ctg/trainer/state.hpp"

namespace ctg::train {

TrainState init_state(const TrainConfig& config, const text::Vocabulary& vocab) {
  config.validate();
  TrainState s;
  s.config = config;
  s.vocab = vocab;
  s.model = model::Model::init(config.dims(vocab.size()), config.seed);
  const ad::AdamOptions gen{config.lr_generator};
  const ad::AdamOptions disc{config.lr_discriminator};
  s.opt_generator = ad::make_optimizer_state(s.model.generator.parameters(), gen);
  s.opt_encoder = ad::make_optimizer_state(s.model.encoder.parameters(), gen);
  for (const auto& d : s.model.discriminators) {
    s.opt_discriminators.push_back(ad::make_optimizer_state(d.parameters(), disc));
  }
  return s;
}

}  // namespace ctg::train
