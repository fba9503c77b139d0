// SPDX-License-Identifier: Apache-2.0
//
// Training configuration as flat `key = value` text. Attributes are declared
// with `attribute.NAME = cat1,cat2,...` and need a matching
// `labeled.NAME = path`. Relative paths resolve against the config file's
// directory. Unknown keys are rejected.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctg/model/model.hpp"
#include "ctg/objectives/losses.hpp"

namespace ctg::train {

struct AttributeConfig {
  std::string name;
  std::vector<std::string> categories;
  std::string labeled_path;
};

struct TrainConfig {
  std::uint64_t seed = 1;

  std::size_t d_emb = 64;
  std::size_t d_hid = 64;
  std::size_t d_z = 16;
  std::size_t disc_filters = 100;
  std::vector<std::size_t> disc_windows = {3, 4, 5};
  bool feed_latent = false;
  double init_scale = 0.1;
  std::size_t max_len = 15;
  std::vector<AttributeConfig> attributes;

  obj::LossWeights weights;

  std::size_t batch_size = 32;
  double lr_generator = 1e-3;  // generator and encoder
  double lr_discriminator = 1e-3;
  // Per-group global gradient norm cap before each Adam update; 0 disables.
  double grad_clip = 0.0;
  std::uint64_t vae_pretrain_steps = 2000;
  std::uint64_t joint_steps = 1000;
  std::uint64_t disc_steps_per_cycle = 1;
  std::uint64_t gen_steps_per_cycle = 1;
  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only

  // Early stop on a held-out VAE loss plateau; off when patience is 0.
  std::uint64_t early_stop_patience = 0;
  std::uint64_t early_stop_every = 100;
  std::size_t heldout_size = 100;

  std::string corpus_path;
  std::string output_dir;
  std::size_t vocab_min_freq = 1;

  static TrainConfig parse(std::string_view text, const std::string& base_dir = "");
  static TrainConfig load(const std::string& path);
  // Canonical text; parse(to_text()) reproduces every field.
  std::string to_text() const;
  void validate() const;

  model::ModelDims dims(std::size_t vocab) const;
  std::size_t attribute_index(std::string_view name) const;
};

// True when two configs build models with identical parameter shapes.
bool same_architecture(const TrainConfig& a, const TrainConfig& b);

}  // namespace ctg::train
