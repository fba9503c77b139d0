// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` text files. '#' starts a comment line; list values are
// comma separated. Entries keep file order.
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctg::util {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view value, char sep = ',');
std::vector<std::string> split_whitespace(std::string_view s);

}  // namespace ctg::util
