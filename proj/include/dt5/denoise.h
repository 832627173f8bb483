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

// Denoising pretraining pairs: each token is independently replaced by the
// mask id with probability mask_rate; maximal masked runs collapse to one
// mask id; the target is the uncorrupted sequence plus end-of-sequence.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dt5/corpus.h"
#include "dt5/rng.h"
#include "dt5/unigram.h"

namespace dt5::denoise {

using unigram::TokenId;
using unigram::TokenIds;

struct CorruptionConfig {
  double mask_rate = 0.15;
  std::uint32_t max_len = 512;
  std::uint64_t seed = 0;
  bool collapse_runs = true;
};

struct DenoisePair {
  TokenIds input_ids;
  TokenIds target_ids;
  std::uint64_t seed = 0;
};

// One Bernoulli(mask_rate) draw per position, in order, from rng.
std::vector<bool> DrawMask(std::size_t length, double mask_rate,
                           Xoshiro256& rng);

// Applies an explicit mask. Throws dt5::Error(kData) if ids contains a
// padding, end-of-sequence or mask id.
DenoisePair ApplyMask(std::span<const TokenId> ids,
                      const std::vector<bool>& masked, bool collapse_runs);

DenoisePair MaskTokens(std::span<const TokenId> ids, const CorruptionConfig& cfg,
                       Xoshiro256& rng);

// Encodes each document, truncates the source to max_len - 1 ids so that
// source + eos fits, corrupts it with the example's derived seed
// MixSeed(cfg.seed, index), and right-pads input and target to max_len.
std::vector<DenoisePair> MakePretrainBatch(
    const std::vector<corpus::PackedDocument>& docs,
    const unigram::Vocab& vocab, const CorruptionConfig& cfg);
std::vector<DenoisePair> MakePretrainBatch(
    const std::vector<std::string>& doc_texts, const unigram::Vocab& vocab,
    const CorruptionConfig& cfg);

// Binary cache, little-endian:
//   "DNPZ" | u32 version=1 | u32 max_len | u64 count |
//   per example: u32 n, u32 ids[n] (input) ; u32 n, u32 ids[n] (target)
void WriteCache(std::ostream& out, std::uint32_t max_len,
                const std::vector<DenoisePair>& pairs);
std::vector<DenoisePair> ReadCache(std::istream& in, std::uint32_t* max_len);

}  // namespace dt5::denoise
