// SPDX-License-Identifier: Apache-2.0
//
// A small template grammar standing in for natural attribute-tagged corpora.
// Each attribute is realized by exactly one word per sentence, drawn from a
// per-category word set, so a rule lookup recovers the label exactly.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctg/util/rng.hpp"

namespace ctg::text {

struct AttributeSpec {
  std::string name;
  std::vector<std::string> categories;
  std::vector<std::vector<std::string>> words;  // realization set per category
};

struct TemplateItem {
  enum class Kind { kLiteral, kRole, kAttribute };
  Kind kind;
  std::string text;  // literal word, role name or attribute name
};

struct SyntheticGrammarSpec {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> roles;  // e.g. subject, object, connective
  std::vector<AttributeSpec> attributes;
  std::vector<std::vector<TemplateItem>> templates;

  // Throws unless realization sets are pairwise disjoint (across categories,
  // attributes, roles and literals) and every template holds each attribute
  // slot exactly once.
  void validate() const;

  std::size_t attribute_index(std::string_view name) const;
  const AttributeSpec& attribute(std::string_view name) const { return attributes[attribute_index(name)]; }
  // Distinct terminals in first-appearance order.
  std::vector<std::string> terminals() const;

  std::string to_text() const;
  static SyntheticGrammarSpec parse(std::string_view text);
};

// 60 terminals; templates of 4 to 7 words; attributes sentiment (2-way) and
// tense (3-way).
SyntheticGrammarSpec default_grammar();

struct GeneratedSentence {
  std::vector<std::string> words;
  std::vector<std::string> slots;     // per word: role or attribute name, empty for literals
  std::map<std::string, int> labels;  // attribute -> category index
};

// Draw order: template index, then each slot left to right (attribute slots
// draw a category unless `forced` fixes it, then a word).
GeneratedSentence sample_sentence(const SyntheticGrammarSpec& spec, util::Rng& rng,
                                  const std::map<std::string, int>& forced = {});

struct LabeledText {
  std::string category;
  std::string sentence;
};

struct SyntheticCorpus {
  std::vector<std::string> unlabeled;
  std::map<std::string, std::vector<LabeledText>> labeled;       // one set per attribute
  std::map<std::string, std::vector<LabeledText>> word_labeled;  // single-word examples
};

// Pure function of its arguments. Labeled sets are category-stratified
// (example i gets category i mod K before shuffling) and drawn from a
// separate stream per attribute.
SyntheticCorpus generate_synthetic_corpus(const SyntheticGrammarSpec& spec, std::size_t n_unlabeled,
                                          std::size_t n_labeled_per_attribute, std::uint64_t seed);

// Category whose realization set meets the sentence, or nullopt when no
// category or more than one distinct category matches.
std::optional<int> oracle_classify(std::span<const std::string> words, std::string_view attribute,
                                   const SyntheticGrammarSpec& spec);

// Role name -> first word of that role found in the sentence.
std::map<std::string, std::string> content_slots(std::span<const std::string> words,
                                                 const SyntheticGrammarSpec& spec);

}  // namespace ctg::text
