// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point. Every subcommand prints its EvalReport as aligned
// text followed by a key=value block; rejections print one `error:` line to
// stderr and exit with status 1.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctg/eval/eval.hpp"
#include "ctg/eval/report.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/objectives/gradcheck_suite.hpp"
#include "ctg/text/corpus_io.hpp"
#include "ctg/text/grammar.hpp"
#include "ctg/trainer/checkpoint.hpp"
#include "ctg/trainer/config.hpp"
#include "ctg/trainer/trainer.hpp"
#include "ctg/util/kv.hpp"
#include "ctg/util/rng.hpp"

namespace {

using namespace ctg;

// Gradient checks pass below this relative error.
constexpr double kGradTolerance = 1e-4;

text::SyntheticGrammarSpec load_grammar(const std::string& source) {
  if (source.empty() || source == "default") return text::default_grammar();
  return text::SyntheticGrammarSpec::parse(util::read_file(source));
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void add_provenance(eval::EvalReport& r, const train::TrainState& s, const std::string& ckpt, std::uint64_t seed) {
  r.add("checkpoint", ckpt);
  r.add("checkpoint_digest", train::checkpoint_digest(s));
  r.add("config_digest", hex64(util::hash_tag(s.config.to_text())));
  r.add("seed", std::to_string(seed));
}

void print(const eval::EvalReport& r) {
  std::cout << r.to_text() << "\n" << r.to_key_values();
  std::cout.flush();
}

// Splits `name=value`; rejects anything else.
std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw std::invalid_argument("expected name=value, got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int category_index(const train::TrainConfig& c, const std::string& attribute, const std::string& category) {
  const auto& cats = c.attributes[c.attribute_index(attribute)].categories;
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k] == category) return static_cast<int>(k);
  }
  throw std::invalid_argument("attribute '" + attribute + "' has no category '" + category + "'");
}

void report_training(eval::EvalReport& r, const train::TrainState& s, const std::string& ckpt) {
  r.add("output_dir", s.config.output_dir);
  r.add("checkpoint", ckpt);
  r.add("checkpoint_digest", train::checkpoint_digest(s));
  r.add("global_step", std::to_string(s.global_step));
  r.add("joint_step", std::to_string(s.joint_step));
  r.add("stopped_early", s.stopped_early ? "true" : "false");
  r.add("metrics", (std::filesystem::path(s.config.output_dir) / "metrics.csv").string());
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::size_t n_unlabeled, std::size_t n_labeled,
              std::size_t n_test, std::uint64_t seed) {
  const auto spec = load_grammar(spec_path);
  std::filesystem::create_directories(out);
  const auto corpus = text::generate_synthetic_corpus(spec, n_unlabeled, n_labeled, seed);
  // Test sentences come from an independent seed so they never overlap the
  // training draw by construction of the stream.
  const auto test_seed = util::Rng::derive(seed, "synth.test").next_u64();
  const auto test = text::generate_synthetic_corpus(spec, 0, n_test, test_seed);
  const std::filesystem::path dir(out);

  util::write_file((dir / "grammar.txt").string(), spec.to_text());
  text::write_unlabeled((dir / "corpus.txt").string(), corpus.unlabeled);
  std::ostringstream cfg;
  cfg << "# generated by `ctgen synth`; paths are relative to this file\n"
      << "seed = " << seed << "\n"
      << "corpus = corpus.txt\n"
      << "output_dir = run\n";
  eval::EvalReport r;
  r.add("grammar", (dir / "grammar.txt").string());
  r.add("corpus", (dir / "corpus.txt").string());
  r.add("n_unlabeled", std::to_string(corpus.unlabeled.size()));
  for (const auto& a : spec.attributes) {
    const auto labeled = "labeled." + a.name + ".tsv";
    const auto words = "words." + a.name + ".tsv";
    const auto held = "test." + a.name + ".tsv";
    text::write_labeled((dir / labeled).string(), corpus.labeled.at(a.name));
    text::write_labeled((dir / words).string(), corpus.word_labeled.at(a.name));
    text::write_labeled((dir / held).string(), test.labeled.at(a.name));
    std::string cats;
    for (const auto& c : a.categories) cats += (cats.empty() ? "" : ", ") + c;
    cfg << "attribute." << a.name << " = " << cats << "\n"
        << "labeled." << a.name << " = " << labeled << "\n";
    r.add("labeled." + a.name, (dir / labeled).string());
    r.add("n_labeled." + a.name, std::to_string(corpus.labeled.at(a.name).size()));
    r.add("word_labeled." + a.name, (dir / words).string());
    r.add("test." + a.name, (dir / held).string());
    r.add("n_test." + a.name, std::to_string(test.labeled.at(a.name).size()));
  }
  // Recipe for this grammar: pretrain.cfg first, then train.cfg with
  // --resume run/pretrained.ctxg. tau reaches 1 as the joint phase starts.
  cfg << "feed_latent = true\n"
      << "vae_pretrain_steps = 2000\n"
      << "kl_anneal_steps = 1000\n";
  const std::string common = cfg.str();
  util::write_file((dir / "pretrain.cfg").string(), common + "batch_size = 100\nlr_generator = 0.01\n");
  util::write_file((dir / "train.cfg").string(), common +
                                                     "batch_size = 32\n"
                                                     "lr_generator = 0.001\n"
                                                     "lr_discriminator = 0.001\n"
                                                     "grad_clip = 5\n"
                                                     "joint_steps = 1500\n"
                                                     "lambda_u = 0.01\n"
                                                     "tau_start = 2.32\n"
                                                     "tau_decay_steps = 3500\n");
  r.add("pretrain_config", (dir / "pretrain.cfg").string());
  r.add("config", (dir / "train.cfg").string());
  r.add("seed", std::to_string(seed));
  print(r);
  return 0;
}

int cmd_pretrain(const std::string& config_path) {
  const auto config = train::TrainConfig::load(config_path);
  const auto s = train::pretrain_vae(config, &std::cerr);
  eval::EvalReport r;
  report_training(r, s, (std::filesystem::path(config.output_dir) / "pretrained.ctxg").string());
  print(r);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  const auto config = train::TrainConfig::load(config_path);
  const auto s = train::train(config, resume, &std::cerr);
  eval::EvalReport r;
  report_training(r, s, (std::filesystem::path(config.output_dir) / "final.ctxg").string());
  if (!resume.empty()) r.add("resumed_from", resume);
  print(r);
  return 0;
}

int cmd_sample(const std::string& ckpt, const std::vector<std::string>& attrs, std::size_t n, std::uint64_t seed,
               bool greedy, double tau) {
  if (n == 0) throw std::invalid_argument("--n must be positive");
  const auto s = train::load_checkpoint(ckpt);
  auto rng = util::Rng::derive(seed, "cli.sample");
  auto prior = model::sample_prior(s.model.dims, n, rng);
  std::map<std::string, std::string> forced;
  for (const auto& a : attrs) {
    const auto [name, value] = split_assignment(a);
    const auto idx = s.config.attribute_index(name);
    const int k = category_index(s.config, name, value);
    for (auto& c : prior.categories[idx]) c = k;
    forced[name] = value;
  }
  const model::LatentCode code{prior.code.z, model::code_from_categories(s.model.dims, prior.categories)};
  const auto seqs = greedy ? model::decode_greedy(s.model.generator, code, s.config.max_len)
                           : model::decode_sample(s.model.generator, code, tau, s.config.max_len, rng);
  eval::EvalReport r;
  add_provenance(r, s, ckpt, seed);
  r.add("n", std::to_string(n));
  r.add("decoding", greedy ? std::string("greedy") : "sample");
  if (!greedy) r.add("tau", tau);
  for (const auto& [name, value] : forced) r.add("attr." + name, value);
  std::string body;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::string codes;
    for (std::size_t a = 0; a < s.config.attributes.size(); ++a) {
      const auto& ac = s.config.attributes[a];
      codes += (codes.empty() ? "" : ",") + ac.name + "=" + ac.categories[prior.categories[a][i]];
    }
    const auto sentence = join(eval::to_words(seqs[i], s.vocab));
    r.add("sample." + std::to_string(i), sentence);
    body += "[" + codes + "] " + sentence + "\n";
  }
  r.add_text("samples", body);
  print(r);
  return 0;
}

int cmd_eval_attr(const std::string& ckpt, const std::string& attribute, std::size_t n, std::uint64_t seed,
                  const std::string& grammar) {
  const auto s = train::load_checkpoint(ckpt);
  const auto res = eval::eval_attribute_accuracy(s, load_grammar(grammar), attribute, n, seed);
  eval::EvalReport r;
  add_provenance(r, s, ckpt, seed);
  r.add("attribute", attribute);
  r.add("n", std::to_string(res.n));
  r.add("accuracy", res.accuracy());
  r.add("accuracy_stderr", res.stderr_());
  r.add("undecidable_rate", res.undecidable_rate());
  const auto& cats = s.config.attributes[s.config.attribute_index(attribute)].categories;
  for (std::size_t k = 0; k < cats.size(); ++k) r.add("requests." + cats[k], std::to_string(res.requests[k]));
  print(r);
  return 0;
}

int cmd_eval_disentangle(const std::string& ckpt, const std::string& attribute, std::size_t pairs,
                         std::uint64_t seed, const std::string& grammar) {
  const auto s = train::load_checkpoint(ckpt);
  const auto res = eval::eval_disentanglement(s, load_grammar(grammar), attribute, pairs, seed);
  eval::EvalReport r;
  add_provenance(r, s, ckpt, seed);
  r.add("attribute", attribute);
  r.add("pairs", std::to_string(res.pairs));
  r.add("preservation", res.preservation);
  r.add("attribute_flipped", res.attribute_flipped);
  r.add("lambda_z", s.config.weights.lambda_z);
  print(r);
  return 0;
}

int cmd_augment(const std::string& ckpt, const std::string& labeled, const std::string& variant_name,
                std::size_t n_gen, std::uint64_t seed, std::string attribute, const std::string& test_path,
                const std::string& grammar, std::size_t n_test, const eval::AugmentOptions& opts) {
  const auto s = train::load_checkpoint(ckpt);
  const auto variant = eval::parse_variant(variant_name);
  if (attribute.empty()) attribute = s.config.attributes.front().name;
  const auto& cats = s.config.attributes[s.config.attribute_index(attribute)].categories;
  const auto train_set =
      text::to_labeled_examples(text::read_labeled(labeled), attribute, cats, s.vocab, s.config.max_len);
  std::vector<text::LabeledText> test_texts;
  if (!test_path.empty()) {
    test_texts = text::read_labeled(test_path);
  } else {
    const auto g = load_grammar(grammar);
    const auto test_seed = util::Rng::derive(seed, "cli.augment.test").next_u64();
    test_texts = text::generate_synthetic_corpus(g, 0, n_test, test_seed).labeled.at(attribute);
  }
  const auto test_set = text::to_labeled_examples(test_texts, attribute, cats, s.vocab, s.config.max_len);
  const auto res = eval::augment_and_train_classifier(s, attribute, train_set, test_set, variant, n_gen, seed, opts);
  eval::EvalReport r;
  add_provenance(r, s, ckpt, seed);
  r.add("attribute", attribute);
  r.add("variant", eval::variant_name(res.variant));
  r.add("test_accuracy", res.test_accuracy);
  r.add("n_train", std::to_string(res.n_train));
  r.add("n_generated", std::to_string(res.n_generated));
  r.add("n_test", std::to_string(res.n_test));
  print(r);
  return 0;
}

int cmd_grid(const std::string& ckpt, const eval::GridSpec& spec) {
  const auto s = train::load_checkpoint(ckpt);
  const auto grid = eval::sample_grid(s, spec);
  eval::EvalReport r;
  add_provenance(r, s, ckpt, spec.seed);
  r.add("vary", spec.vary.empty() ? std::string("nothing") : spec.vary);
  r.add("rows", std::to_string(grid.row_labels.size()));
  r.add("z_draws", std::to_string(grid.blocks.size()));
  for (std::size_t z = 0; z < grid.blocks.size(); ++z) {
    for (std::size_t row = 0; row < grid.blocks[z].size(); ++row) {
      r.add("grid." + std::to_string(z) + "." + grid.row_labels[row], grid.blocks[z][row]);
    }
  }
  r.add_text("grid", grid.to_text());
  print(r);
  return 0;
}

int cmd_gradcheck(const std::string& scale, std::uint64_t seed, double eps) {
  if (scale != "micro") throw std::invalid_argument("only --scale micro is supported, got '" + scale + "'");
  const auto cases = obj::run_gradcheck_suite(seed, eps);
  eval::EvalReport r;
  r.add("scale", scale);
  r.add("seed", std::to_string(seed));
  r.add("eps", eps);
  r.add("tolerance", kGradTolerance);
  bool ok = true;
  for (const auto& c : cases) {
    const bool pass = c.result.max_relative_error < kGradTolerance;
    ok = ok && pass;
    std::string groups;
    for (const auto& g : c.groups) groups += (groups.empty() ? "" : ",") + g;
    r.add(c.loss + ".max_rel_error", c.result.max_relative_error);
    r.add(c.loss + ".entries", std::to_string(c.result.entries_checked));
    r.add(c.loss + ".groups", groups);
    r.add(c.loss + ".worst", c.result.worst_parameter + "[" + std::to_string(c.result.worst_index) + "]");
    r.add(c.loss + ".status", pass ? std::string("pass") : "fail");
  }
  r.add("status", ok ? std::string("pass") : "fail");
  print(r);
  if (!ok) std::cerr << "error: gradient check exceeded relative error " << kGradTolerance << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controllable text generation: training, sampling and evaluation"};
  app.require_subcommand(1);

  std::string spec_path = "default", out, config, resume, ckpt, attribute, grammar = "default", labeled, variant,
              test_path, vary, scale = "micro";
  std::size_t n_unlabeled = 1000, n_labeled = 200, n_test = 1000, n = 10, n_eval = 3000, pairs = 500, n_gen = 1000;
  std::uint64_t seed = 0;
  bool greedy = false;
  double tau = 1.0, eps = obj::kMicroEps;
  std::vector<std::string> attrs, fixed;
  eval::AugmentOptions aug;
  eval::GridSpec grid;

  auto* synth = app.add_subcommand("synth", "emit a synthetic corpus, labeled sets and a training config");
  synth->add_option("--spec", spec_path, "grammar file, or 'default'");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--n-unlabeled", n_unlabeled, "unlabeled sentences");
  synth->add_option("--n-labeled", n_labeled, "labeled sentences per attribute");
  synth->add_option("--n-test", n_test, "held-out labeled sentences per attribute");
  synth->add_option("--seed", seed);

  auto* pretrain = app.add_subcommand("pretrain", "VAE initialization with c drawn from the prior");
  pretrain->add_option("--config", config)->required()->check(CLI::ExistingFile);

  auto* trainc = app.add_subcommand("train", "VAE initialization followed by alternating joint training");
  trainc->add_option("--config", config)->required()->check(CLI::ExistingFile);
  trainc->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  auto* sample = app.add_subcommand("sample", "conditional generation");
  sample->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  sample->add_option("--attr", attrs, "name=value; repeatable, unset attributes come from the prior");
  sample->add_option("--n", n);
  sample->add_option("--seed", seed);
  sample->add_option("--tau", tau, "sampling temperature");
  sample->add_flag("--greedy", greedy, "argmax decoding");

  auto* eattr = app.add_subcommand("eval-attr", "attribute accuracy of conditional samples under the rule oracle");
  eattr->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  eattr->add_option("--attr", attribute)->required();
  eattr->add_option("--n", n_eval, "samples");
  eattr->add_option("--seed", seed);
  eattr->add_option("--grammar", grammar, "grammar file, or 'default'");

  auto* edis = app.add_subcommand("eval-disentangle", "content preservation when only the attribute code changes");
  edis->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  edis->add_option("--attr", attribute)->required();
  edis->add_option("--pairs", pairs);
  edis->add_option("--seed", seed);
  edis->add_option("--grammar", grammar, "grammar file, or 'default'");

  auto* augment = app.add_subcommand("augment-eval", "classifier trained on labeled plus generated data");
  augment->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  augment->add_option("--labeled", labeled)->required()->check(CLI::ExistingFile);
  augment->add_option("--variant", variant)->required()->check(CLI::IsMember({"std", "h-reg", "ours"}));
  augment->add_option("--n-gen", n_gen);
  augment->add_option("--seed", seed);
  augment->add_option("--attr", attribute, "defaults to the checkpoint's first attribute");
  augment->add_option("--test", test_path, "held-out labeled file; generated from --grammar when absent")
      ->check(CLI::ExistingFile);
  augment->add_option("--grammar", grammar, "grammar file, or 'default'");
  augment->add_option("--n-test", n_test, "generated test sentences when --test is absent");
  augment->add_option("--steps", aug.steps, "classifier updates");
  augment->add_option("--batch", aug.batch_size);
  augment->add_option("--lr", aug.lr);

  auto* gridc = app.add_subcommand("sample-grid", "greedy decodes varying one factor with the rest fixed");
  gridc->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  gridc->add_option("--vary", vary, "attribute name, 'z', or empty");
  gridc->add_option("--fixed", fixed, "name=value; repeatable");
  gridc->add_option("--n-z", grid.n_z);
  gridc->add_option("--rows", grid.rows, "rows when varying z or nothing");
  gridc->add_option("--seed", seed);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of every loss");
  grad->add_option("--scale", scale)->required();
  grad->add_option("--seed", seed);
  grad->add_option("--eps", eps);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(spec_path, out, n_unlabeled, n_labeled, n_test, seed);
    if (*pretrain) return cmd_pretrain(config);
    if (*trainc) return cmd_train(config, resume);
    if (*sample) return cmd_sample(ckpt, attrs, n, seed, greedy, tau);
    if (*eattr) return cmd_eval_attr(ckpt, attribute, n_eval, seed, grammar);
    if (*edis) return cmd_eval_disentangle(ckpt, attribute, pairs, seed, grammar);
    if (*augment) {
      return cmd_augment(ckpt, labeled, variant, n_gen, seed, attribute, test_path, grammar, n_test, aug);
    }
    if (*gridc) {
      grid.vary = vary;
      grid.seed = seed;
      for (const auto& f : fixed) grid.fixed.insert(split_assignment(f));
      return cmd_grid(ckpt, grid);
    }
    if (*grad) return cmd_gradcheck(scale, seed, eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
