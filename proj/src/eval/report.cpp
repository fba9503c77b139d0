// SPDX-License-Identifier: Apache-2.0
#include "ctg/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace ctg::eval {

void EvalReport::add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }

void EvalReport::add(const std::string& key, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  add(key, std::string(buf));
}

void EvalReport::add_text(const std::string& title, const std::string& body) { texts_.emplace_back(title, body); }

std::string EvalReport::value(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw std::out_of_range("report has no key '" + key + "'");
}

std::string EvalReport::to_text() const {
  std::size_t width = 0;
  for (const auto& e : entries_) width = std::max(width, e.first.size());
  std::string out;
  for (const auto& [k, v] : entries_) out += k + std::string(width - k.size() + 2, ' ') + v + "\n";
  for (const auto& [title, body] : texts_) out += "\n" + title + "\n" + body;
  return out;
}

std::string EvalReport::to_key_values() const {
  std::string out = "BEGIN REPORT\n";
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out + "END REPORT\n";
}

}  // namespace ctg::eval
