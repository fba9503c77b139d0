// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ctg/eval/eval.hpp"
#include "ctg/eval/report.hpp"
#include "ctg/model/forward.hpp"
#include "ctg/text/corpus_io.hpp"
#include "ctg/text/grammar.hpp"
#include "ctg/text/sequence.hpp"
#include "ctg/trainer/state.hpp"

using namespace ctg;

namespace {

const text::SyntheticGrammarSpec& grammar() {
  static const auto g = text::default_grammar();
  return g;
}

train::TrainConfig small_config(std::size_t d_emb, std::size_t d_hid) {
  train::TrainConfig c;
  for (const auto& a : grammar().attributes) c.attributes.push_back({a.name, a.categories, "unused.tsv"});
  c.d_emb = d_emb;
  c.d_hid = d_hid;
  c.d_z = 4;
  c.disc_filters = 8;
  c.seed = 3;
  return c;
}

train::TrainState untrained() {
  return train::init_state(small_config(16, 16), text::Vocabulary(grammar().terminals()));
}

// A generator that writes the first realization word of the requested
// sentiment and then stops. Hidden units 0..K-1 hold the sentiment one-hot in
// frozen memory cells; unit K latches once any word has been read and
// drives EOS.
train::TrainState one_word_generator() {
  const auto& sentiment = grammar().attribute("sentiment");
  const std::size_t K = sentiment.categories.size();
  const std::size_t H = K + 1;
  auto s = train::init_state(small_config(1, H), text::Vocabulary(grammar().terminals()));
  auto& g = s.model.generator;
  const std::size_t V = s.model.dims.vocab, dz = s.model.dims.d_z;
  const std::size_t off = s.model.dims.attribute_offset(0);

  model::fill(g.embedding, 1.0);
  g.embedding.mutable_values()[text::kBos] = 0.0;

  model::fill(g.init_weight, 0.0);
  model::fill(g.init_bias, 0.0);
  for (std::size_t k = 0; k < K; ++k) g.init_weight.mutable_values()[(dz + off + k) * 2 * H + H + k] = 3.0;

  model::fill(g.lstm.weight, 0.0);
  auto b = g.lstm.bias.mutable_values();
  for (std::size_t j = 0; j < H; ++j) {
    b[j] = -30.0;         // input gate shut
    b[H + j] = 30.0;      // forget gate open
    b[2 * H + j] = 30.0;  // output gate open
    b[3 * H + j] = 0.0;
  }
  b[3 * H + K] = 30.0;
  // Row 0 is the single embedding feature; it opens the stop unit's input gate.
  g.lstm.weight.mutable_values()[K] = 60.0;

  model::fill(g.out_weight, 0.0);
  model::fill(g.out_bias, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const int word = s.vocab.lookup(sentiment.words[k][0]);
    g.out_weight.mutable_values()[k * V + static_cast<std::size_t>(word)] = 50.0;
  }
  g.out_weight.mutable_values()[K * V + text::kEos] = 200.0;
  return s;
}

}  // namespace

TEST_CASE("the constructed generator emits one attribute word") {
  const auto s = one_word_generator();
  const auto& sentiment = grammar().attribute("sentiment");
  util::Rng rng(1);
  auto prior = model::sample_prior(s.model.dims, 6, rng);
  for (std::size_t b = 0; b < 6; ++b) prior.categories[0][b] = static_cast<int>(b % 2);
  prior.code.c = model::code_from_categories(s.model.dims, prior.categories);
  const auto out = model::decode_greedy(s.model.generator, prior.code, 15);
  for (std::size_t b = 0; b < 6; ++b) {
    CHECK(eval::to_words(out[b], s.vocab) == std::vector<std::string>{sentiment.words[b % 2][0]});
  }
}

TEST_CASE("attribute accuracy of the constructed generator is 1") {
  const auto r = eval::eval_attribute_accuracy(one_word_generator(), grammar(), "sentiment", 500, 7);
  CHECK(r.n == 500);
  CHECK(r.correct == 500);
  CHECK(r.accuracy() == 1.0);
  CHECK(r.undecidable == 0);
  CHECK(r.requests == std::vector<std::size_t>{250, 250});
  CHECK_THROWS_AS(eval::eval_attribute_accuracy(one_word_generator(), grammar(), "sentiment", 0, 7),
                  std::invalid_argument);
  CHECK_THROWS_AS(eval::eval_attribute_accuracy(one_word_generator(), grammar(), "color", 10, 7), std::exception);
}

TEST_CASE("untrained accuracy is no better than chance") {
  const auto s = untrained();
  const auto r = eval::eval_attribute_accuracy(s, grammar(), "sentiment", 3000, 2);
  const std::size_t decided = r.n - r.undecidable;
  REQUIRE(decided > 0);
  // Among decidable samples the verdict is a coin flip; undecidable ones count as wrong.
  const double p = static_cast<double>(r.correct) / static_cast<double>(decided);
  CHECK(std::abs(p - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(decided)));
  CHECK(r.accuracy() <= 0.5 + 3.0 * r.stderr_());
  CHECK(r.accuracy() == eval::eval_attribute_accuracy(s, grammar(), "sentiment", 3000, 2).accuracy());
}

TEST_CASE("pair preservation") {
  const std::vector<std::string> a{"the", "plot", "is", "dull", "for", "kids"};
  const std::vector<std::string> b{"the", "plot", "is", "good", "for", "kids"};
  const std::vector<std::string> c{"the", "cast", "is", "good", "for", "kids"};
  CHECK(eval::pair_preservation(a, b, grammar()) == 1.0);
  CHECK(eval::pair_preservation(a, c, grammar()) == doctest::Approx(2.0 / 3.0));
  CHECK(eval::pair_preservation({"good"}, {"good"}, grammar()) == 1.0);
  CHECK(eval::pair_preservation({"good"}, {"bad"}, grammar()) == 0.0);
}

TEST_CASE("disentanglement of the constructed generator") {
  const auto s = one_word_generator();
  // Flipping c rewrites the only word, so nothing is preserved but the label follows c.
  const auto flipped = eval::eval_disentanglement(s, grammar(), "sentiment", 100, 4);
  CHECK(flipped.pairs == 100);
  CHECK(flipped.preservation == 0.0);
  CHECK(flipped.attribute_flipped == 1.0);
  const auto same = eval::eval_disentanglement(s, grammar(), "sentiment", 100, 4, false);
  CHECK(same.preservation == 1.0);
}

TEST_CASE("augmentation variants") {
  CHECK(eval::parse_variant("std") == eval::AugmentVariant::kStd);
  CHECK(eval::parse_variant("h-reg") == eval::AugmentVariant::kHReg);
  CHECK(eval::variant_name(eval::parse_variant("ours")) == "ours");
  CHECK_THROWS_AS(eval::parse_variant("best"), std::invalid_argument);

  const auto s = one_word_generator();
  const auto corpus = text::generate_synthetic_corpus(grammar(), 0, 20, 8);
  const auto test = text::generate_synthetic_corpus(grammar(), 0, 200, 9);
  const auto& cats = grammar().attribute("sentiment").categories;
  const auto train_set = text::to_labeled_examples(corpus.labeled.at("sentiment"), "sentiment", cats, s.vocab, 15);
  const auto test_set = text::to_labeled_examples(test.labeled.at("sentiment"), "sentiment", cats, s.vocab, 15);
  eval::AugmentOptions opt;
  opt.steps = 150;
  const auto std_r = eval::augment_and_train_classifier(s, "sentiment", train_set, test_set,
                                                        eval::AugmentVariant::kStd, 200, 5, opt);
  const auto ours = eval::augment_and_train_classifier(s, "sentiment", train_set, test_set,
                                                       eval::AugmentVariant::kOurs, 200, 5, opt);
  CHECK(std_r.n_train == 20);
  CHECK(ours.n_generated == 200);
  CHECK(ours.n_test == 200);
  CHECK(ours.test_accuracy >= std_r.test_accuracy);
  const auto again = eval::augment_and_train_classifier(s, "sentiment", train_set, test_set,
                                                        eval::AugmentVariant::kOurs, 200, 5, opt);
  CHECK(again.test_accuracy == ours.test_accuracy);
}

TEST_CASE("sample grids") {
  const auto s = untrained();
  eval::GridSpec g;
  g.vary = "tense";
  g.fixed = {{"sentiment", "positive"}};
  g.n_z = 2;
  const auto grid = eval::sample_grid(s, g);
  CHECK(grid.row_labels.size() == 3);
  CHECK(grid.blocks.size() == 2);
  for (const auto& block : grid.blocks) CHECK(block.size() == 3);

  eval::GridSpec none;
  none.rows = 3;
  const auto flat = eval::sample_grid(s, none);
  for (const auto& block : flat.blocks) {
    REQUIRE(block.size() == 3);
    CHECK(block[0] == block[1]);
    CHECK(block[1] == block[2]);
  }
  CHECK(!flat.to_text().empty());

  eval::GridSpec bad;
  bad.vary = "color";
  CHECK_THROWS_AS(eval::sample_grid(s, bad), std::invalid_argument);
}

TEST_CASE("report prints readable lines and a key-value block") {
  eval::EvalReport r;
  r.add("seed", "7");
  r.add("accuracy", 0.5);
  r.add_text("samples", "a b\nc d");
  CHECK(r.value("seed") == "7");
  const auto kv = r.to_key_values();
  CHECK(kv.find("seed=7") != std::string::npos);
  CHECK(kv.find("BEGIN") != std::string::npos);
  CHECK(kv.find("END") != std::string::npos);
  const auto text = r.to_text();
  CHECK(text.find("accuracy") != std::string::npos);
  CHECK(text.find("a b") != std::string::npos);
}
