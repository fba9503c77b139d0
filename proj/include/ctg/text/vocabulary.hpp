// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctg::text {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;

// Token <-> id map. Ids 0..3 are the reserved PAD/BOS/EOS/UNK markers;
// ordinary tokens start at 4.
class Vocabulary {
 public:
  Vocabulary();
  // `tokens` are the non-reserved entries in id order. Duplicates and reserved
  // spellings are rejected.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int lookup(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  bool contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

  // One non-reserved token per line; line n holds id n + 4.
  std::string to_text() const;
  static Vocabulary from_text(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Tokens seen fewer than `min_freq` times fall back to UNK. Ordering is by
// descending frequency, ties broken lexicographically. Empty corpus throws.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus, std::size_t min_freq);

}  // namespace ctg::text
