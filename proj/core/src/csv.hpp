// Copyright 2026 The StreamStart Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace streamstart::internal {

using CsvRow = std::vector<std::string>;

// RFC-4180: comma separated, optional double-quoted fields with "" escapes
// and embedded newlines, CRLF or LF record ends. A UTF-8 BOM is skipped.
// Blank records are dropped. Throws SchemaError on an unterminated quote.
std::vector<CsvRow> parse_csv(std::string_view text);

// Quotes a field only when it contains a delimiter, quote or line break.
std::string csv_field(std::string_view field);

std::string join_csv(const CsvRow& row);

// Shortest text that parses back to the same double.
std::string format_double(double value);

// Full-string numeric parse; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_uint(std::string_view text, unsigned long long& out);

}  // namespace streamstart::internal
