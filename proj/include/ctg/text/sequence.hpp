// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ctg/text/vocabulary.hpp"

namespace ctg::text {

// Content token ids, without BOS/EOS.
using TokenSequence = std::vector<int>;

class LengthError : public std::invalid_argument {
 public:
  LengthError(std::size_t length, std::size_t max_len);
  std::size_t length() const { return length_; }

 private:
  std::size_t length_;
};

// Sentences longer than `max_len` words are rejected, never truncated.
TokenSequence encode(std::string_view sentence, const Vocabulary& vocab, std::size_t max_len);
// Stops at the first EOS; BOS and PAD are skipped.
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

struct LabeledExample {
  TokenSequence tokens;
  std::map<std::string, int> labels;  // attribute name -> category index
};

// Token matrix with BOS/EOS framing and right padding. Row b holds
// BOS x_1 .. x_n EOS PAD..., lengths[b] = n + 2.
struct Batch {
  std::size_t size = 0;
  std::size_t width = 0;  // max_len + 2
  std::vector<int> ids;
  std::vector<std::size_t> lengths;
  std::vector<std::string> label_names;
  std::vector<int> labels;  // size x label_names.size(); -1 where absent

  int id(std::size_t b, std::size_t t) const { return ids[b * width + t]; }
  // 1 for real positions (including BOS/EOS), 0 for PAD.
  double weight(std::size_t b, std::size_t t) const { return t < lengths[b] ? 1.0 : 0.0; }
  std::size_t longest() const;
  bool has_labels(std::string_view attribute) const;
  // Category per example for `attribute`; throws if the batch lacks it.
  std::vector<int> label_column(std::string_view attribute) const;
};

Batch make_batch(std::span<const LabeledExample> examples, std::size_t max_len);
Batch make_batch(std::span<const TokenSequence> sequences, std::size_t max_len);

// Seeded shuffle, then consecutive chunks; the last partial batch is kept.
std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples, std::size_t batch_size,
                                std::uint64_t seed, std::size_t max_len);

}  // namespace ctg::text
