// Copyright 2026 The dt5 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <string>
#include <string_view>

namespace dt5::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes UTF-8; malformed sequences become U+FFFD (one per bad byte).
std::u32string Decode(std::string_view text);

void Append(char32_t cp, std::string& out);
std::string Encode(std::u32string_view text);

bool IsValid(std::string_view text);

// ASCII whitespace plus U+00A0; LF is reported separately by callers.
inline bool IsSpace(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' ||
         c == U'\f' || c == 0xA0;
}

// Uppercase Latin letters in the ASCII and Latin-1 ranges plus Latin
// Extended-A even code points.
bool IsUpper(char32_t c);

}  // namespace dt5::utf8
