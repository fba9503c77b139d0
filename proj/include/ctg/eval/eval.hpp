// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocols on trained states, scored by the grammar's exact rule
// oracle. Every result is a pure function of (state, arguments, seed).
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctg/text/grammar.hpp"
#include "ctg/trainer/state.hpp"

namespace ctg::eval {

struct AccuracyResult {
  std::string attribute;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t undecidable = 0;
  std::vector<std::size_t> requests;  // samples conditioned on each category
  std::uint64_t seed = 0;

  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
  double undecidable_rate() const { return n ? static_cast<double>(undecidable) / static_cast<double>(n) : 0.0; }
  // Binomial standard error of accuracy().
  double stderr_() const;
};

// Sample i is conditioned on category i mod K of `attribute`, other
// attributes and z drawn from the prior, and decoded by ancestral sampling at
// tau = 1. Undecidable oracle verdicts count as wrong.
AccuracyResult eval_attribute_accuracy(const train::TrainState& s, const text::SyntheticGrammarSpec& grammar,
                                       const std::string& attribute, std::size_t n, std::uint64_t seed);

struct PreservationResult {
  std::string attribute;
  std::size_t pairs = 0;
  double preservation = 0.0;     // mean over pairs
  double attribute_flipped = 0.0;  // fraction of pairs whose oracle labels follow c and c'
  std::uint64_t seed = 0;
};

// Per-pair score in [0, 1] for two decodes that should share content:
// fraction of content roles present in either sentence whose words agree.
// Two sentences without content roles score 1 when identical, else 0.
double pair_preservation(const std::vector<std::string>& a, const std::vector<std::string>& b,
                         const text::SyntheticGrammarSpec& grammar);

// Greedy decodes of (z, c) and (z, c') where c' changes only `attribute`
// (to the next category, cyclically, when `change` is true).
PreservationResult eval_disentanglement(const train::TrainState& s, const text::SyntheticGrammarSpec& grammar,
                                        const std::string& attribute, std::size_t n_pairs, std::uint64_t seed,
                                        bool change = true);

enum class AugmentVariant { kStd, kHReg, kOurs };
AugmentVariant parse_variant(const std::string& name);
std::string variant_name(AugmentVariant v);

struct AugmentOptions {
  std::size_t steps = 400;
  std::size_t batch_size = 32;
  double lr = 1e-3;
};

struct AugmentResult {
  AugmentVariant variant = AugmentVariant::kStd;
  double test_accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_generated = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

// Trains a freshly initialized discriminator-architecture classifier on
// `train_set` under the variant's objective and reports accuracy on
// `test_set`:
//   std    supervised loss only
//   h-reg  + lambda_u * beta * H(q(.|x^)) on generated sentences
//   ours   + lambda_u * (-log q(c|x^) + beta * H) on generated (x^, c) pairs
// Generated sentences are sampled once at tau = 1 with c cycling. All
// variants share the initialization and batch order for a given seed.
AugmentResult augment_and_train_classifier(const train::TrainState& s, const std::string& attribute,
                                           const std::vector<text::LabeledExample>& train_set,
                                           const std::vector<text::LabeledExample>& test_set, AugmentVariant variant,
                                           std::size_t n_generated, std::uint64_t seed,
                                           const AugmentOptions& options = {});

// Which factor changes from row to row of a grid. `vary` is an attribute
// name, "z", or empty for nothing. `fixed` pins categories of the other
// attributes by name; unpinned ones come from the prior.
struct GridSpec {
  std::string vary;
  std::map<std::string, std::string> fixed;
  std::size_t n_z = 3;
  std::size_t rows = 3;  // used when varying z or nothing
  std::uint64_t seed = 0;
};

struct SampleGrid {
  std::vector<std::string> row_labels;
  std::vector<std::vector<std::string>> blocks;  // per z draw, one greedy decode per row
  std::string to_text() const;
};

SampleGrid sample_grid(const train::TrainState& s, const GridSpec& spec);

// Decodes token ids to words.
std::vector<std::string> to_words(const text::TokenSequence& ids, const text::Vocabulary& vocab);

}  // namespace ctg::eval
