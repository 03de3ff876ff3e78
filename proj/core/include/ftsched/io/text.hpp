/*
 * Copyright 2026 The ftsched Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftsched::io {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string join(std::span<const double> values, char sep);
std::string join(std::span<const int> values, char sep);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<double> parse_doubles(std::string_view s, char sep);
std::vector<int> parse_ints(std::string_view s, char sep);

// `key=value` lines; '#' starts a comment. Throws IoError on malformed lines.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::string& path);
void write_key_values(const std::string& path, const KeyValues& kv);

}  // namespace ftsched::io
