// SPDX-License-Identifier: Apache-2.0
//
// Alternating training: VAE initialization with c from the prior, then cycles
// of discriminator steps (each attribute on its own labeled set) followed by
// generator/encoder steps.
//
// Randomness comes from streams derived from (seed, purpose, counter):
//   shuffle.corpus / shuffle.labeled.NAME   per-epoch batch order
//   noise.pretrain, noise.generator         per update: eps, then z and c
//   noise.discriminator.NAME                per update: z and c, then tokens
// Each update reads only its own stream, so resuming from a checkpoint
// replays an uninterrupted run exactly and attributes never share draws.
#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctg/objectives/losses.hpp"
#include "ctg/text/sequence.hpp"
#include "ctg/trainer/metrics.hpp"
#include "ctg/trainer/state.hpp"
#include "ctg/util/rng.hpp"

namespace ctg::train {

struct TrainingData {
  std::vector<text::TokenSequence> corpus;
  std::vector<text::TokenSequence> heldout;  // only filled when early stop is on
  std::vector<std::vector<text::LabeledExample>> labeled;  // config attribute order
};

// Vocabulary over the unlabeled corpus followed by the labeled sentences.
text::Vocabulary build_training_vocabulary(const TrainConfig& config);
// Rejects a missing labeled set for any declared attribute.
TrainingData load_training_data(const TrainConfig& config, const text::Vocabulary& vocab);

// Batch `index` of the endless stream over `examples`: epoch index / batches,
// each epoch a fresh permutation from (seed, tag, epoch).
text::Batch stream_batch(const std::vector<text::LabeledExample>& examples, std::size_t batch_size,
                         std::uint64_t seed, const std::string& tag, std::uint64_t index, std::size_t max_len);
text::Batch stream_batch(const std::vector<text::TokenSequence>& sequences, std::size_t batch_size,
                         std::uint64_t seed, const std::string& tag, std::uint64_t index, std::size_t max_len);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::uint64_t step, const std::string& phase, const std::string& detail);
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

// One update of generator and encoder under the VAE loss alone.
obj::LossReport train_step_vae(TrainState& s, const text::Batch& batch, obj::CodeSource source, double kl_weight,
                               util::Rng& rng);
// One update of the attribute's discriminator on a labeled batch plus a fresh
// batch of generated sentences. Generator and encoder are untouched.
obj::LossReport train_step_discriminator(TrainState& s, std::size_t attribute, const text::Batch& labeled,
                                         util::Rng& rng);
// One backward pass of the generator objective: the generator moves along its
// full gradient, the encoder along the VAE gradient only (the independency
// term sees a frozen encoder). Discriminators are untouched.
obj::LossReport train_step_generator(TrainState& s, const text::Batch& real, double kl_weight, double tau,
                                     util::Rng& rng);

struct RunOptions {
  MetricsLog* metrics = nullptr;
  std::string checkpoint_dir;  // empty: no checkpoint files
  std::ostream* log = nullptr;
  std::uint64_t log_every = 100;
};

// Pretraining steps until global_step reaches config.vae_pretrain_steps.
void run_pretraining(TrainState& s, const TrainingData& data, const RunOptions& opts);
// Joint cycles until joint_step reaches config.joint_steps or early stop.
void run_joint(TrainState& s, const TrainingData& data, const RunOptions& opts);

// Mean VAE loss (kl weight 1, code from the discriminators) on `sentences`
// with noise fixed by `seed`.
double heldout_vae_loss(const model::Model& m, const std::vector<text::TokenSequence>& sentences,
                        std::size_t max_len, std::uint64_t seed);

// Fraction of real target positions (tokens and EOS) whose teacher-forced
// argmax is correct, with z at the posterior mean and c the discriminators' argmax.
double reconstruction_accuracy(const model::Model& m, const std::vector<text::TokenSequence>& sentences,
                               std::size_t max_len);

// Whole-run drivers writing metrics.csv and checkpoints under output_dir.
TrainState pretrain_vae(const TrainConfig& config, std::ostream* log = nullptr);
TrainState train(const TrainConfig& config, const std::string& resume_path = "", std::ostream* log = nullptr);

}  // namespace ctg::train
