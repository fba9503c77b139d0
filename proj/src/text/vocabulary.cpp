// SPDX-License-Identifier: Apache-2.0
#include "ctg/text/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ctg/util/kv.hpp"

namespace ctg::text {

namespace {
const std::vector<std::string> kReservedNames = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : id_to_token_(kReservedNames) {
  for (int i = 0; i < kNumReserved; ++i) token_to_id_[kReservedNames[static_cast<std::size_t>(i)]] = i;
  for (const auto& t : tokens) {
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("vocabulary token '" + t + "' is empty or contains whitespace");
    }
    if (token_to_id_.count(t)) throw std::invalid_argument("duplicate or reserved vocabulary token '" + t + "'");
    token_to_id_[t] = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(t);
  }
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (std::size_t i = kNumReserved; i < id_to_token_.size(); ++i) {
    out += id_to_token_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line = util::trim(text.substr(pos, nl - pos));
    if (!line.empty()) tokens.push_back(std::move(line));
    pos = nl + 1;
  }
  return Vocabulary(tokens);
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus, std::size_t min_freq) {
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& s : corpus) {
    for (auto& t : util::split_whitespace(s)) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [t, n] : freq) {
    if (n >= min_freq && std::find(kReservedNames.begin(), kReservedNames.end(), t) == kReservedNames.end()) {
      kept.emplace_back(t, n);
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [t, n] : kept) tokens.push_back(t);
  return Vocabulary(tokens);
}

}  // namespace ctg::text
