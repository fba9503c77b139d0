// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ctg::eval {

// Ordered results printed twice: aligned human-readable lines, then a
// machine-readable `key=value` block between BEGIN/END markers.
class EvalReport {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add_text(const std::string& title, const std::string& body);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string value(const std::string& key) const;

  std::string to_text() const;
  std::string to_key_values() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::pair<std::string, std::string>> texts_;
};

}  // namespace ctg::eval
