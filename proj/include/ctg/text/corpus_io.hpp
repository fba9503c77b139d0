// SPDX-License-Identifier: Apache-2.0
//
// Corpus files: unlabeled text has one whitespace-tokenized sentence per line;
// labeled text is `category<TAB>sentence` per line.
#pragma once

#include <string>
#include <vector>

#include "ctg/text/grammar.hpp"
#include "ctg/text/sequence.hpp"

namespace ctg::text {

std::vector<std::string> read_unlabeled(const std::string& path);
void write_unlabeled(const std::string& path, const std::vector<std::string>& sentences);

std::vector<LabeledText> parse_labeled(const std::string& text);
std::vector<LabeledText> read_labeled(const std::string& path);
void write_labeled(const std::string& path, const std::vector<LabeledText>& examples);

// Maps category names to indices of `categories`; unknown names and
// over-length sentences are rejected with the offending line number.
std::vector<LabeledExample> to_labeled_examples(const std::vector<LabeledText>& texts, const std::string& attribute,
                                                const std::vector<std::string>& categories, const Vocabulary& vocab,
                                                std::size_t max_len);

}  // namespace ctg::text
