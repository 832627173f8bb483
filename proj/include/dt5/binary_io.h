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

// Little-endian fixed-width helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dt5/error.h"

namespace dt5::binary_io {

template <typename T>
void WriteLE(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(u & 0xFF);
    u = static_cast<decltype(u)>(u >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadLE(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    ThrowData("unexpected end of binary file");
  }
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    u = static_cast<decltype(u)>((u << 8) | bytes[i]);
  }
  return static_cast<T>(u);
}

inline void WriteF32(std::ostream& out, float value) {
  WriteLE<std::uint32_t>(out, std::bit_cast<std::uint32_t>(value));
}

inline float ReadF32(std::istream& in) {
  return std::bit_cast<float>(ReadLE<std::uint32_t>(in));
}

inline void ExpectMagic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    ThrowData(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace dt5::binary_io
