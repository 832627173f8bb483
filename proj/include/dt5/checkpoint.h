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

// Binary checkpoint container. Little-endian layout:
//   "SQFG", u32 version,
//   config: u32 vocab_size, d_model, n_heads, d_ff, n_enc_layers,
//           n_dec_layers, max_len; u8 position_scheme; u8 tie_embeddings;
//           u32 num_buckets, max_distance; i32 decoder_start_id,
//   u32 tensor count, then per tensor in name order:
//     u16 name length, name bytes (UTF-8), u8 rank, u32 dims[rank],
//     f32 data[] row-major.
// Optimizer state travels in the same container under "opt/" names.

#include <istream>
#include <ostream>
#include <string>

#include "dt5/model.h"

namespace dt5::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

struct Checkpoint {
  model::ModelParams params;
  TensorMap optimizer_state;
};

void Write(std::ostream& out, const model::ModelParams& params,
           const TensorMap& optimizer_state = {});
Checkpoint Read(std::istream& in);

// File variants; Save writes to a temporary file and renames it in place.
void Save(const std::string& path, const model::ModelParams& params,
          const TensorMap& optimizer_state = {});
Checkpoint Load(const std::string& path);

// Rounds every value to f32, matching what a save/load cycle produces.
void RoundToStorage(TensorMap& tensors);

}  // namespace dt5::checkpoint
