// SPDX-License-Identifier: Apache-2.0
#include "ctg/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "ctg/ad/ops.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/text/corpus_io.hpp"
#include "ctg/trainer/checkpoint.hpp"

namespace ctg::train {

namespace {

void zero_grads(const std::vector<ad::Parameter>& params) {
  for (const auto& p : params) ad::Tensor(p.tensor).zero_grad();
}

void update(std::vector<ad::Parameter>& params, ad::OptimizerState& state, double clip) {
  ad::clip_grad_norm(params, clip);
  ad::adam_step(params, state);
}

void require_finite(double v, std::uint64_t step, const std::string& phase) {
  if (!std::isfinite(v)) throw TrainingDiverged(step, phase, "loss is " + std::to_string(v));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, const std::string& tag, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = util::Rng::derive(seed, tag, epoch);
  rng.shuffle(order);
  return order;
}

template <class T>
std::vector<T> stream_slice(const std::vector<T>& items, std::size_t batch_size, std::uint64_t seed,
                            const std::string& tag, std::uint64_t index) {
  if (items.empty()) throw std::invalid_argument("cannot draw batches from an empty set (" + tag + ")");
  const std::size_t per_epoch = (items.size() + batch_size - 1) / batch_size;
  const auto order = epoch_order(items.size(), seed, tag, index / per_epoch);
  const std::size_t begin = (index % per_epoch) * batch_size;
  const std::size_t end = std::min(items.size(), begin + batch_size);
  std::vector<T> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(items[order[i]]);
  return out;
}

void require_labeled_file(const AttributeConfig& a) {
  if (!std::filesystem::exists(a.labeled_path)) {
    throw std::invalid_argument("labeled set for attribute '" + a.name + "' not found: " + a.labeled_path);
  }
}

std::string attribute_tag(const TrainState& s, std::size_t a) { return s.config.attributes[a].name; }

void maybe_checkpoint(const TrainState& s, const RunOptions& opts) {
  if (opts.checkpoint_dir.empty() || s.config.checkpoint_every == 0) return;
  if (s.global_step % s.config.checkpoint_every != 0) return;
  save_checkpoint(s, (std::filesystem::path(opts.checkpoint_dir) /
                      ("checkpoint-" + std::to_string(s.global_step) + ".ctxg"))
                         .string());
}

// Parameters never move on a non-finite loss, so the state is still the last
// finite one; keep it on disk before reporting.
[[noreturn]] void abort_run(const TrainState& s, const RunOptions& opts, const TrainingDiverged& e) {
  if (!opts.checkpoint_dir.empty()) {
    save_checkpoint(s, (std::filesystem::path(opts.checkpoint_dir) / "last-finite.ctxg").string());
  }
  throw e;
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::uint64_t step, const std::string& phase, const std::string& detail)
    : std::runtime_error("training diverged at step " + std::to_string(step) + " (" + phase + "): " + detail),
      step_(step) {}

text::Vocabulary build_training_vocabulary(const TrainConfig& config) {
  if (config.corpus_path.empty()) throw std::invalid_argument("config has no corpus path");
  auto sentences = text::read_unlabeled(config.corpus_path);
  for (const auto& a : config.attributes) {
    require_labeled_file(a);
    for (const auto& ex : text::read_labeled(a.labeled_path)) sentences.push_back(ex.sentence);
  }
  return text::build_vocabulary(sentences, config.vocab_min_freq);
}

TrainingData load_training_data(const TrainConfig& config, const text::Vocabulary& vocab) {
  TrainingData data;
  const auto sentences = text::read_unlabeled(config.corpus_path);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    try {
      data.corpus.push_back(text::encode(sentences[i], vocab, config.max_len));
    } catch (const text::LengthError& e) {
      throw std::invalid_argument(config.corpus_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (config.early_stop_patience > 0) {
    if (data.corpus.size() <= config.heldout_size) {
      throw std::invalid_argument("corpus too small to hold out " + std::to_string(config.heldout_size) +
                                  " sentences for early stopping");
    }
    data.heldout.assign(data.corpus.end() - static_cast<std::ptrdiff_t>(config.heldout_size), data.corpus.end());
    data.corpus.resize(data.corpus.size() - config.heldout_size);
  }
  if (data.corpus.empty()) throw std::invalid_argument("corpus " + config.corpus_path + " is empty");
  for (const auto& a : config.attributes) {
    require_labeled_file(a);
    auto examples = text::to_labeled_examples(text::read_labeled(a.labeled_path), a.name, a.categories, vocab,
                                              config.max_len);
    if (examples.empty()) throw std::invalid_argument("labeled set for attribute '" + a.name + "' is empty");
    data.labeled.push_back(std::move(examples));
  }
  return data;
}

text::Batch stream_batch(const std::vector<text::LabeledExample>& examples, std::size_t batch_size,
                         std::uint64_t seed, const std::string& tag, std::uint64_t index, std::size_t max_len) {
  const auto slice = stream_slice(examples, batch_size, seed, tag, index);
  return text::make_batch(std::span<const text::LabeledExample>(slice), max_len);
}

text::Batch stream_batch(const std::vector<text::TokenSequence>& sequences, std::size_t batch_size,
                         std::uint64_t seed, const std::string& tag, std::uint64_t index, std::size_t max_len) {
  const auto slice = stream_slice(sequences, batch_size, seed, tag, index);
  return text::make_batch(std::span<const text::TokenSequence>(slice), max_len);
}

obj::LossReport train_step_vae(TrainState& s, const text::Batch& batch, obj::CodeSource source, double kl_weight,
                               util::Rng& rng) {
  auto gen = s.model.generator.parameters();
  auto enc = s.model.encoder.parameters();
  zero_grads(gen);
  zero_grads(enc);
  const auto noise = obj::draw_vae_noise(s.model, batch, source, rng);
  const auto loss = obj::loss_vae(s.model, batch, kl_weight, noise);
  require_finite(loss.report.vae, s.global_step, "vae");
  ad::backward(loss.value);
  update(gen, s.opt_generator, s.config.grad_clip);
  update(enc, s.opt_encoder, s.config.grad_clip);
  return loss.report;
}

obj::LossReport train_step_discriminator(TrainState& s, std::size_t attribute, const text::Batch& labeled,
                                         util::Rng& rng) {
  auto params = s.model.discriminators.at(attribute).parameters();
  zero_grads(params);
  const auto sleep = obj::draw_sleep_sample(s.model, s.config.batch_size, s.config.max_len, rng);
  const auto loss = obj::loss_discriminator(s.model, attribute, labeled, sleep, s.config.weights);
  require_finite(loss.report.disc_total, s.global_step, "disc." + attribute_tag(s, attribute));
  ad::backward(loss.value);
  update(params, s.opt_discriminators[attribute], s.config.grad_clip);
  return loss.report;
}

obj::LossReport train_step_generator(TrainState& s, const text::Batch& real, double kl_weight, double tau,
                                     util::Rng& rng) {
  auto gen = s.model.generator.parameters();
  auto enc = s.model.encoder.parameters();
  zero_grads(gen);
  zero_grads(enc);
  const auto noise = obj::draw_generator_noise(s.model, real, rng);
  const auto loss =
      obj::loss_generator(s.model, real, noise, kl_weight, tau, s.config.max_len, s.config.weights);
  require_finite(loss.report.gen_total, s.global_step, "gen");
  ad::backward(loss.value);
  update(gen, s.opt_generator, s.config.grad_clip);
  update(enc, s.opt_encoder, s.config.grad_clip);
  return loss.report;
}

void run_pretraining(TrainState& s, const TrainingData& data, const RunOptions& opts) {
  const auto& c = s.config;
  if (s.joint_step > 0) return;
  while (s.global_step < c.vae_pretrain_steps) {
    const auto step = s.global_step;
    const auto batch = stream_batch(data.corpus, c.batch_size, c.seed, "shuffle.corpus", step, c.max_len);
    auto rng = util::Rng::derive(c.seed, "noise.pretrain", step);
    obj::LossReport r;
    try {
      r = train_step_vae(s, batch, obj::CodeSource::kPrior, obj::anneal_kl_weight(step, c.weights), rng);
    } catch (const TrainingDiverged& e) {
      abort_run(s, opts, e);
    }
    s.global_step += 1;
    if (opts.metrics) opts.metrics->append(s.global_step, "pretrain", r);
    if (opts.log && opts.log_every > 0 && s.global_step % opts.log_every == 0) {
      *opts.log << "pretrain step " << s.global_step << " recon_nll " << r.recon_nll << " kl " << r.kl << "\n";
    }
    maybe_checkpoint(s, opts);
  }
}

void run_joint(TrainState& s, const TrainingData& data, const RunOptions& opts) {
  const auto& c = s.config;
  if (data.labeled.size() != c.attributes.size()) {
    throw std::invalid_argument("training data has " + std::to_string(data.labeled.size()) +
                                " labeled sets for " + std::to_string(c.attributes.size()) + " attributes");
  }
  while (s.joint_step < c.joint_steps && !s.stopped_early) {
    const auto step = s.global_step;
    const auto row = step + 1;
    const double kl_weight = obj::anneal_kl_weight(step, c.weights);
    const double tau = obj::anneal_temperature(step, c.weights);
    obj::LossReport last;
    try {
      for (std::uint64_t k = 0; k < c.disc_steps_per_cycle; ++k) {
        const auto u = s.joint_step * c.disc_steps_per_cycle + k;
        for (std::size_t a = 0; a < c.attributes.size(); ++a) {
          const auto& name = c.attributes[a].name;
          const auto batch =
              stream_batch(data.labeled[a], c.batch_size, c.seed, "shuffle.labeled." + name, u, c.max_len);
          auto rng = util::Rng::derive(c.seed, "noise.discriminator." + name, u);
          const auto r = train_step_discriminator(s, a, batch, rng);
          if (opts.metrics) opts.metrics->append(row, "disc." + name, r);
        }
      }
      for (std::uint64_t k = 0; k < c.gen_steps_per_cycle; ++k) {
        const auto u = s.joint_step * c.gen_steps_per_cycle + k;
        const auto batch = stream_batch(data.corpus, c.batch_size, c.seed, "shuffle.corpus",
                                        s.pretrain_steps_done() + u, c.max_len);
        auto rng = util::Rng::derive(c.seed, "noise.generator", u);
        last = train_step_generator(s, batch, kl_weight, tau, rng);
        if (opts.metrics) opts.metrics->append(row, "gen", last);
      }
    } catch (const TrainingDiverged& e) {
      abort_run(s, opts, e);
    }
    s.global_step += 1;
    s.joint_step += 1;
    if (opts.log && opts.log_every > 0 && s.joint_step % opts.log_every == 0) {
      *opts.log << "joint step " << s.joint_step << " gen_total " << last.gen_total << " attr_c " << last.attr_c
                << " attr_z " << last.attr_z << " tau " << tau << "\n";
    }
    if (c.early_stop_patience > 0 && s.joint_step % c.early_stop_every == 0) {
      const double v = heldout_vae_loss(s.model, data.heldout, c.max_len, c.seed);
      if (v < s.best_heldout) {
        s.best_heldout = v;
        s.stale_evaluations = 0;
      } else if (++s.stale_evaluations >= c.early_stop_patience) {
        s.stopped_early = true;
        if (opts.log) *opts.log << "early stop at joint step " << s.joint_step << "\n";
      }
    }
    maybe_checkpoint(s, opts);
  }
}

double heldout_vae_loss(const model::Model& m, const std::vector<text::TokenSequence>& sentences,
                        std::size_t max_len, std::uint64_t seed) {
  if (sentences.empty()) throw std::invalid_argument("held-out set is empty");
  const std::size_t chunk = 64;
  double total = 0.0;
  for (std::size_t begin = 0, i = 0; begin < sentences.size(); begin += chunk, ++i) {
    const std::span<const text::TokenSequence> part(sentences.data() + begin,
                                                    std::min(chunk, sentences.size() - begin));
    const auto batch = text::make_batch(part, max_len);
    auto rng = util::Rng::derive(seed, "noise.heldout", i);
    const auto noise = obj::draw_vae_noise(m, batch, obj::CodeSource::kDiscriminator, rng);
    total += obj::loss_vae(m, batch, 1.0, noise).report.vae * static_cast<double>(part.size());
  }
  return total / static_cast<double>(sentences.size());
}

double reconstruction_accuracy(const model::Model& m, const std::vector<text::TokenSequence>& sentences,
                               std::size_t max_len) {
  const std::size_t chunk = 64;
  std::size_t correct = 0, total = 0;
  const auto g = m.generator.frozen();
  const auto e = m.encoder.frozen();
  for (std::size_t begin = 0; begin < sentences.size(); begin += chunk) {
    const std::span<const text::TokenSequence> part(sentences.data() + begin,
                                                    std::min(chunk, sentences.size() - begin));
    const auto batch = text::make_batch(part, max_len);
    const auto q = model::encode(e, batch);
    std::vector<std::vector<int>> cats;
    const auto seq = model::one_hot_sequence(batch, m.dims.vocab);
    for (const auto& d : m.discriminators) {
      const auto p = model::discriminate(d.frozen(), seq);
      std::vector<int> col(batch.size);
      for (std::size_t b = 0; b < batch.size; ++b) {
        const double* row = p.values().data() + b * d.categories;
        col[b] = static_cast<int>(std::max_element(row, row + d.categories) - row);
      }
      cats.push_back(std::move(col));
    }
    const auto tf = model::decode_teacher_forced(g, {q.mu, model::code_from_categories(m.dims, cats)}, batch);
    const std::size_t V = tf.log_probs.cols();
    for (std::size_t t = 0; t < tf.steps; ++t) {
      for (std::size_t b = 0; b < batch.size; ++b) {
        if (t + 1 >= batch.lengths[b]) continue;
        const double* row = tf.log_probs.values().data() + (t * batch.size + b) * V;
        const auto arg = static_cast<int>(std::max_element(row, row + V) - row);
        correct += arg == batch.id(b, t + 1);
        ++total;
      }
    }
  }
  if (total == 0) throw std::invalid_argument("no sentences to reconstruct");
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

RunOptions file_options(const TrainConfig& config, MetricsLog* metrics, std::ostream* log) {
  RunOptions opts;
  opts.metrics = metrics;
  opts.checkpoint_dir = config.output_dir;
  opts.log = log;
  return opts;
}

std::string output_file(const TrainConfig& config, const std::string& name) {
  if (config.output_dir.empty()) throw std::invalid_argument("config has no output_dir");
  std::filesystem::create_directories(config.output_dir);
  return (std::filesystem::path(config.output_dir) / name).string();
}

}  // namespace

TrainState pretrain_vae(const TrainConfig& config, std::ostream* log) {
  config.validate();
  const auto metrics_path = output_file(config, "metrics.csv");
  const auto vocab = build_training_vocabulary(config);
  const auto data = load_training_data(config, vocab);
  auto state = init_state(config, vocab);
  auto metrics = MetricsLog::open(metrics_path);
  run_pretraining(state, data, file_options(config, &metrics, log));
  save_checkpoint(state, output_file(config, "pretrained.ctxg"));
  return state;
}

TrainState train(const TrainConfig& config, const std::string& resume_path, std::ostream* log) {
  config.validate();
  const auto metrics_path = output_file(config, "metrics.csv");
  TrainState state;
  if (resume_path.empty()) {
    state = init_state(config, build_training_vocabulary(config));
  } else {
    state = load_checkpoint(resume_path);
    if (!same_architecture(state.config, config)) {
      throw std::invalid_argument("checkpoint " + resume_path + " was trained with a different architecture");
    }
    state.config = config;
  }
  const auto data = load_training_data(config, state.vocab);
  const bool resume = !resume_path.empty() && std::filesystem::exists(metrics_path);
  auto metrics = MetricsLog::open(metrics_path, state.global_step, resume);
  const auto opts = file_options(config, &metrics, log);
  run_pretraining(state, data, opts);
  run_joint(state, data, opts);
  save_checkpoint(state, output_file(config, "final.ctxg"));
  return state;
}

}  // namespace ctg::train
