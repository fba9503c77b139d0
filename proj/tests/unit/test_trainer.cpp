// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctg/model/forward.hpp"
#include "ctg/text/corpus_io.hpp"
#include "ctg/text/grammar.hpp"
#include "ctg/trainer/checkpoint.hpp"
#include "ctg/trainer/metrics.hpp"
#include "ctg/trainer/trainer.hpp"

using namespace ctg;
using namespace ctg::train;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> flat(const std::vector<ad::Parameter>& params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

// A fresh directory with a small synthetic corpus and both labeled sets.
struct MicroRun {
  fs::path dir;
  TrainConfig config;

  explicit MicroRun(const std::string& name, std::size_t n_unlabeled = 60) {
    dir = fs::temp_directory_path() / ("ctg_trainer_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto g = text::default_grammar();
    const auto corpus = text::generate_synthetic_corpus(g, n_unlabeled, 20, 5);
    text::write_unlabeled((dir / "corpus.txt").string(), corpus.unlabeled);
    for (const auto& a : g.attributes) {
      text::write_labeled((dir / ("labeled." + a.name + ".tsv")).string(), corpus.labeled.at(a.name));
      config.attributes.push_back({a.name, a.categories, (dir / ("labeled." + a.name + ".tsv")).string()});
    }
    config.seed = 11;
    config.d_emb = 8;
    config.d_hid = 8;
    config.d_z = 4;
    config.disc_filters = 4;
    config.disc_windows = {2, 3};
    config.batch_size = 8;
    config.vae_pretrain_steps = 6;
    config.joint_steps = 4;
    config.weights.kl_anneal_steps = 5;
    config.weights.tau_decay_steps = 8;
    config.corpus_path = (dir / "corpus.txt").string();
    config.output_dir = (dir / "out").string();
  }
  ~MicroRun() { fs::remove_all(dir); }
};

text::Batch fixed_batch(const TrainState& s, std::size_t n) {
  const auto data = load_training_data(s.config, s.vocab);
  return stream_batch(data.corpus, n, 1, "test", 0, s.config.max_len);
}

}  // namespace

TEST_CASE("config text round trip and rejection") {
  MicroRun run("config");
  auto& c = run.config;
  c.grad_clip = 2.5;
  c.feed_latent = true;
  c.weights.lambda_u = 0.01;
  const auto back = TrainConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.grad_clip == 2.5);
  CHECK(back.attributes.size() == 2);

  CHECK_THROWS_WITH_AS(TrainConfig::parse(c.to_text() + "learning_rate = 1\n"), doctest::Contains("learning_rate"),
                       std::invalid_argument);
  auto bad = c;
  bad.grad_clip = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::parse("attribute.sentiment = negative,positive\n").validate(), std::invalid_argument);
}

TEST_CASE("relative paths resolve against the config directory") {
  const auto c = TrainConfig::parse("corpus = corpus.txt\noutput_dir = run\n", "/data/x");
  CHECK(fs::path(c.corpus_path) == fs::path("/data/x/corpus.txt"));
  CHECK(fs::path(c.output_dir) == fs::path("/data/x/run"));
}

TEST_CASE("missing labeled set is rejected at startup") {
  MicroRun run("missing");
  run.config.attributes[1].labeled_path = (run.dir / "absent.tsv").string();
  CHECK_THROWS_WITH_AS(train::train(run.config), doctest::Contains("tense"), std::invalid_argument);
}

TEST_CASE("metrics rows") {
  CHECK(std::string(kMetricsHeader) ==
        "step,phase,recon_nll,kl,vae,attr_c,attr_z,gen_total,disc_sup,disc_unsup,disc_total,kl_weight,tau");
  obj::LossReport r;
  r.recon_nll = 0.5;
  r.kl_weight = 1.0;
  CHECK(metrics_row(3, "vae", r) == "3,vae,0.5,,,,,,,,,1,");
}

TEST_CASE("pretraining writes one metrics row per step") {
  MicroRun run("pretrain_rows");
  const auto s = pretrain_vae(run.config);
  CHECK(s.global_step == 6);
  CHECK(s.joint_step == 0);
  std::istringstream csv(slurp(fs::path(run.config.output_dir) / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == kMetricsHeader);
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(line.rfind(std::to_string(rows) + ",pretrain,", 0) == 0);
  }
  CHECK(rows == 6);
}

TEST_CASE("checkpoint round trip is byte-identical and preserves the loss") {
  MicroRun run("ckpt");
  const auto s = train::train(run.config);
  const auto path = (run.dir / "a.ctxg").string();
  save_checkpoint(s, path);
  const auto loaded = load_checkpoint(path);
  CHECK(serialize_checkpoint(loaded) == slurp(path));
  CHECK(loaded.global_step == s.global_step);
  CHECK(loaded.config.to_text() == s.config.to_text());
  CHECK(checkpoint_digest(loaded) == checkpoint_digest(s));

  const auto batch = fixed_batch(s, 8);
  util::Rng r1(3), r2(3);
  const auto n1 = obj::draw_vae_noise(s.model, batch, obj::CodeSource::kDiscriminator, r1);
  const auto n2 = obj::draw_vae_noise(loaded.model, batch, obj::CodeSource::kDiscriminator, r2);
  CHECK(obj::loss_vae(s.model, batch, 1.0, n1).value.item() == obj::loss_vae(loaded.model, batch, 1.0, n2).value.item());
}

TEST_CASE("corrupt checkpoints are rejected") {
  MicroRun run("corrupt");
  const auto s = pretrain_vae(run.config);
  const auto bytes = serialize_checkpoint(s);
  auto flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x01);
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), CheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 9)), CheckpointError);
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(wrong_magic), CheckpointError);
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(wrong_version), doctest::Contains("version"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint((run.dir / "nope.ctxg").string()), CheckpointError);
}

TEST_CASE("same seed gives identical metrics and parameters") {
  MicroRun a("det_a"), b("det_b");
  const auto sa = train::train(a.config);
  const auto sb = train::train(b.config);
  CHECK(slurp(fs::path(a.config.output_dir) / "metrics.csv") == slurp(fs::path(b.config.output_dir) / "metrics.csv"));
  CHECK(flat(sa.model.all_parameters()) == flat(sb.model.all_parameters()));
  // 6 pretraining rows, then per cycle two discriminator rows and one generator row.
  CHECK(sa.global_step == 10);
}

TEST_CASE("resuming from a checkpoint replays an uninterrupted run") {
  MicroRun whole("resume_whole"), split("resume_split");
  whole.config.checkpoint_every = 0;
  split.config.checkpoint_every = 4;
  const auto sw = train::train(whole.config);
  train::train(split.config);
  const auto metrics_full = slurp(fs::path(split.config.output_dir) / "metrics.csv");
  const auto final_full = slurp(fs::path(split.config.output_dir) / "final.ctxg");
  // Restart from the mid-joint checkpoint, then from the mid-pretraining one.
  for (const char* name : {"checkpoint-8.ctxg", "checkpoint-4.ctxg"}) {
    const auto sr = train::train(split.config, (fs::path(split.config.output_dir) / name).string());
    CHECK(flat(sr.model.all_parameters()) == flat(sw.model.all_parameters()));
    CHECK(serialize_checkpoint(sr) == final_full);
    CHECK(slurp(fs::path(split.config.output_dir) / "metrics.csv") == metrics_full);
  }
  CHECK(metrics_full == slurp(fs::path(whole.config.output_dir) / "metrics.csv"));
}

TEST_CASE("zero joint steps reproduce the pretraining checkpoint") {
  MicroRun a("zero_joint");
  a.config.joint_steps = 0;
  const auto trained = train::train(a.config);
  const auto pre = pretrain_vae(a.config);
  CHECK(serialize_checkpoint(trained) == serialize_checkpoint(pre));
}

TEST_CASE("one-sentence corpus is memorized") {
  MicroRun run("memorize");
  run.config.d_emb = 16;
  run.config.d_hid = 16;
  run.config.batch_size = 1;
  run.config.lr_generator = 1e-2;
  auto s = init_state(run.config, build_training_vocabulary(run.config));
  const auto data = load_training_data(run.config, s.vocab);
  const std::vector<text::TokenSequence> one{data.corpus[0]};
  const auto batch = text::make_batch(std::span<const text::TokenSequence>(one), s.config.max_len);
  obj::LossReport r;
  for (std::uint64_t step = 0; step < 500; ++step) {
    auto rng = util::Rng::derive(1, "memorize", step);
    r = train_step_vae(s, batch, obj::CodeSource::kPrior, 0.0, rng);
  }
  const double per_token = r.recon_nll / static_cast<double>(batch.lengths[0] - 1);
  CHECK(per_token < 0.01);
  CHECK(reconstruction_accuracy(s.model, one, s.config.max_len) == 1.0);
}

TEST_CASE("discriminator steps leave generator and encoder untouched") {
  MicroRun run("isolation_d");
  auto s = init_state(run.config, build_training_vocabulary(run.config));
  const auto data = load_training_data(run.config, s.vocab);
  const auto g0 = flat(s.model.generator.parameters());
  const auto e0 = flat(s.model.encoder.parameters());
  const auto d1 = flat(s.model.discriminators[1].parameters());
  const auto d0 = flat(s.model.discriminators[0].parameters());
  const auto batch = stream_batch(data.labeled[0], 8, 1, "t", 0, s.config.max_len);
  util::Rng rng(2);
  train_step_discriminator(s, 0, batch, rng);
  CHECK(flat(s.model.generator.parameters()) == g0);
  CHECK(flat(s.model.encoder.parameters()) == e0);
  CHECK(flat(s.model.discriminators[1].parameters()) == d1);
  CHECK(flat(s.model.discriminators[0].parameters()) != d0);
}

TEST_CASE("generator steps leave the discriminators untouched") {
  MicroRun run("isolation_g");
  auto s = init_state(run.config, build_training_vocabulary(run.config));
  const auto d0 = flat(s.model.discriminators[0].parameters());
  const auto d1 = flat(s.model.discriminators[1].parameters());
  const auto g0 = flat(s.model.generator.parameters());
  util::Rng rng(3);
  train_step_generator(s, fixed_batch(s, 8), 0.5, 0.5, rng);
  CHECK(flat(s.model.discriminators[0].parameters()) == d0);
  CHECK(flat(s.model.discriminators[1].parameters()) == d1);
  CHECK(flat(s.model.generator.parameters()) != g0);
}

TEST_CASE("supervised discriminator loss falls on a fixed batch") {
  MicroRun run("overfit_d");
  run.config.weights.lambda_u = 0.0;
  auto s = init_state(run.config, build_training_vocabulary(run.config));
  const auto data = load_training_data(run.config, s.vocab);
  const auto batch = stream_batch(data.labeled[0], 8, 1, "t", 0, s.config.max_len);
  double prev = INFINITY;
  for (int i = 0; i < 50; ++i) {
    util::Rng rng(4);
    const auto r = train_step_discriminator(s, 0, batch, rng);
    CHECK(r.disc_sup < prev);
    CHECK(r.disc_total == r.disc_sup);
    prev = r.disc_sup;
  }
}

TEST_CASE("generator objective falls on a frozen batch") {
  MicroRun run("overfit_g");
  auto s = init_state(run.config, build_training_vocabulary(run.config));
  const auto batch = fixed_batch(s, 8);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 50; ++i) {
    util::Rng rng(5);
    const auto r = train_step_generator(s, batch, 1.0, 0.5, rng);
    if (i == 0) first = r.gen_total;
    last = r.gen_total;
  }
  CHECK(last < first);
}

TEST_CASE("without attribute terms a generator step is a VAE step") {
  MicroRun run("identity");
  run.config.weights.lambda_c = 0.0;
  run.config.weights.lambda_z = 0.0;
  auto a = init_state(run.config, build_training_vocabulary(run.config));
  auto b = init_state(run.config, a.vocab);
  const auto batch = fixed_batch(a, 8);
  for (int i = 0; i < 10; ++i) {
    auto ra = util::Rng::derive(7, "noise", i);
    auto rb = util::Rng::derive(7, "noise", i);
    const auto x = train_step_generator(a, batch, 0.3, 0.5, ra);
    const auto y = train_step_vae(b, batch, obj::CodeSource::kDiscriminator, 0.3, rb);
    CHECK(x.vae == y.vae);
  }
  CHECK(flat(a.model.generator.parameters()) == flat(b.model.generator.parameters()));
  CHECK(flat(a.model.encoder.parameters()) == flat(b.model.encoder.parameters()));
}

TEST_CASE("one attribute's labeled set does not affect another's discriminator") {
  MicroRun run("indep");
  run.config.disc_steps_per_cycle = 3;
  run.config.joint_steps = 1;
  const auto vocab = build_training_vocabulary(run.config);
  const auto data = load_training_data(run.config, vocab);
  auto swapped = data;
  const auto regenerated = text::generate_synthetic_corpus(text::default_grammar(), 0, 20, 99);
  swapped.labeled[1] = text::to_labeled_examples(regenerated.labeled.at("tense"), "tense",
                                                 run.config.attributes[1].categories, vocab, run.config.max_len);
  auto a = init_state(run.config, vocab);
  auto b = init_state(run.config, vocab);
  run_joint(a, data, {});
  run_joint(b, swapped, {});
  CHECK(flat(a.model.discriminators[0].parameters()) == flat(b.model.discriminators[0].parameters()));
  CHECK(flat(a.model.discriminators[1].parameters()) != flat(b.model.discriminators[1].parameters()));
}

TEST_CASE("non-finite loss aborts and keeps the last finite state") {
  MicroRun run("diverge");
  run.config.vae_pretrain_steps = 3;
  auto s = pretrain_vae(run.config);
  // Poison one output bias so the next reconstruction loss is NaN.
  s.model.generator.out_bias.mutable_values()[4] = std::nan("");
  save_checkpoint(s, (run.dir / "poisoned.ctxg").string());
  run.config.vae_pretrain_steps = 5;
  CHECK_THROWS_AS(train::train(run.config, (run.dir / "poisoned.ctxg").string()), TrainingDiverged);
  const auto kept = load_checkpoint((fs::path(run.config.output_dir) / "last-finite.ctxg").string());
  CHECK(kept.global_step == 3);
}
