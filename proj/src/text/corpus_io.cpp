// SPDX-License-Identifier: Apache-2.0
#include "ctg/text/corpus_io.hpp"

#include <algorithm>
#include <stdexcept>

#include "ctg/util/kv.hpp"

namespace ctg::text {

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::vector<std::string> read_unlabeled(const std::string& path) {
  std::vector<std::string> out;
  for (auto& line : lines_of(util::read_file(path))) {
    auto t = util::trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

void write_unlabeled(const std::string& path, const std::vector<std::string>& sentences) {
  std::string out;
  for (const auto& s : sentences) out += s + '\n';
  util::write_file(path, out);
}

std::vector<LabeledText> parse_labeled(const std::string& text) {
  std::vector<LabeledText> out;
  std::size_t n = 0;
  for (const auto& line : lines_of(text)) {
    ++n;
    if (util::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::invalid_argument("labeled line " + std::to_string(n) + " has no TAB separator");
    }
    out.push_back({util::trim(line.substr(0, tab)), util::trim(line.substr(tab + 1))});
  }
  return out;
}

std::vector<LabeledText> read_labeled(const std::string& path) { return parse_labeled(util::read_file(path)); }

void write_labeled(const std::string& path, const std::vector<LabeledText>& examples) {
  std::string out;
  for (const auto& e : examples) out += e.category + '\t' + e.sentence + '\n';
  util::write_file(path, out);
}

std::vector<LabeledExample> to_labeled_examples(const std::vector<LabeledText>& texts, const std::string& attribute,
                                                const std::vector<std::string>& categories, const Vocabulary& vocab,
                                                std::size_t max_len) {
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto it = std::find(categories.begin(), categories.end(), texts[i].category);
    if (it == categories.end()) {
      throw std::invalid_argument("example " + std::to_string(i + 1) + ": unknown " + attribute + " category '" +
                                  texts[i].category + "'");
    }
    LabeledExample ex;
    try {
      ex.tokens = encode(texts[i].sentence, vocab, max_len);
    } catch (const LengthError& e) {
      throw std::invalid_argument("example " + std::to_string(i + 1) + ": " + e.what());
    }
    ex.labels[attribute] = static_cast<int>(it - categories.begin());
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace ctg::text
