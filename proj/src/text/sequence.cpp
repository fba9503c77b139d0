// SPDX-License-Identifier: Apache-2.0
#include "ctg/text/sequence.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ctg/util/kv.hpp"
#include "ctg/util/rng.hpp"

namespace ctg::text {

LengthError::LengthError(std::size_t length, std::size_t max_len)
    : std::invalid_argument("sentence has " + std::to_string(length) + " tokens, limit is " +
                            std::to_string(max_len)),
      length_(length) {}

TokenSequence encode(std::string_view sentence, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  const auto words = util::split_whitespace(sentence);
  if (words.size() > max_len) throw LengthError(words.size(), max_len);
  TokenSequence ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.lookup(w));
  return ids;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::size_t Batch::longest() const { return lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end()); }

bool Batch::has_labels(std::string_view attribute) const {
  return std::find(label_names.begin(), label_names.end(), attribute) != label_names.end();
}

std::vector<int> Batch::label_column(std::string_view attribute) const {
  auto it = std::find(label_names.begin(), label_names.end(), attribute);
  if (it == label_names.end()) throw std::invalid_argument("batch has no labels for '" + std::string(attribute) + "'");
  const auto col = static_cast<std::size_t>(it - label_names.begin());
  std::vector<int> out(size);
  for (std::size_t b = 0; b < size; ++b) {
    out[b] = labels[b * label_names.size() + col];
    if (out[b] < 0) throw std::invalid_argument("example " + std::to_string(b) + " is missing its '" +
                                                std::string(attribute) + "' label");
  }
  return out;
}

namespace {

void fill_row(Batch& batch, std::size_t b, const TokenSequence& tokens, std::size_t max_len) {
  if (tokens.size() > max_len) throw LengthError(tokens.size(), max_len);
  int* row = batch.ids.data() + b * batch.width;
  row[0] = kBos;
  std::copy(tokens.begin(), tokens.end(), row + 1);
  row[tokens.size() + 1] = kEos;
  batch.lengths[b] = tokens.size() + 2;
}

Batch empty_batch(std::size_t n, std::size_t max_len) {
  Batch batch;
  batch.size = n;
  batch.width = max_len + 2;
  batch.ids.assign(n * batch.width, kPad);
  batch.lengths.assign(n, 0);
  return batch;
}

}  // namespace

Batch make_batch(std::span<const TokenSequence> sequences, std::size_t max_len) {
  Batch batch = empty_batch(sequences.size(), max_len);
  for (std::size_t b = 0; b < sequences.size(); ++b) fill_row(batch, b, sequences[b], max_len);
  return batch;
}

Batch make_batch(std::span<const LabeledExample> examples, std::size_t max_len) {
  Batch batch = empty_batch(examples.size(), max_len);
  std::set<std::string> names;
  for (const auto& ex : examples) {
    for (const auto& [k, v] : ex.labels) names.insert(k);
  }
  batch.label_names.assign(names.begin(), names.end());
  batch.labels.assign(examples.size() * names.size(), -1);
  for (std::size_t b = 0; b < examples.size(); ++b) {
    fill_row(batch, b, examples[b].tokens, max_len);
    for (std::size_t c = 0; c < batch.label_names.size(); ++c) {
      auto it = examples[b].labels.find(batch.label_names[c]);
      if (it != examples[b].labels.end()) batch.labels[b * names.size() + c] = it->second;
    }
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples, std::size_t batch_size,
                                std::uint64_t seed, std::size_t max_len) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  util::Rng rng(seed);
  rng.shuffle(order);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<LabeledExample> chunk;
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) chunk.push_back(examples[order[j]]);
    out.push_back(make_batch(std::span<const LabeledExample>(chunk), max_len));
  }
  return out;
}

}  // namespace ctg::text
