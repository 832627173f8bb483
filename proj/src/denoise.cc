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
#include "dt5/denoise.h"

#include <algorithm>

#include "dt5/binary_io.h"
#include "dt5/error.h"

namespace dt5::denoise {

namespace {

constexpr std::uint32_t kCacheVersion = 1;

void PadTo(TokenIds& ids, std::size_t len) {
  if (ids.size() < len) ids.resize(len, unigram::kPadId);
}

void WriteIds(std::ostream& out, const TokenIds& ids) {
  binary_io::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(ids.size()));
  for (TokenId id : ids) {
    binary_io::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(id));
  }
}

TokenIds ReadIds(std::istream& in) {
  const auto n = binary_io::ReadLE<std::uint32_t>(in);
  TokenIds ids(n);
  for (auto& id : ids) id = static_cast<TokenId>(binary_io::ReadLE<std::uint32_t>(in));
  return ids;
}

}  // namespace

std::vector<bool> DrawMask(std::size_t length, double mask_rate,
                           Xoshiro256& rng) {
  std::vector<bool> masked(length);
  for (std::size_t i = 0; i < length; ++i) masked[i] = rng.Uniform() < mask_rate;
  return masked;
}

DenoisePair ApplyMask(std::span<const TokenId> ids,
                      const std::vector<bool>& masked, bool collapse_runs) {
  if (masked.size() != ids.size()) ThrowUsage("mask length mismatch");
  DenoisePair pair;
  pair.target_ids.reserve(ids.size() + 1);
  pair.input_ids.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    // Unknown is the one reserved id plain text can encode to.
    if (ids[i] < static_cast<TokenId>(unigram::kNumReserved) &&
        ids[i] != unigram::kUnkId) {
      ThrowData("denoising source contains reserved id " + std::to_string(ids[i]));
    }
    pair.target_ids.push_back(ids[i]);
    if (!masked[i]) {
      pair.input_ids.push_back(ids[i]);
    } else if (!collapse_runs || pair.input_ids.empty() ||
               pair.input_ids.back() != unigram::kMaskId) {
      pair.input_ids.push_back(unigram::kMaskId);
    }
  }
  if (!ids.empty()) pair.target_ids.push_back(unigram::kEosId);
  return pair;
}

DenoisePair MaskTokens(std::span<const TokenId> ids, const CorruptionConfig& cfg,
                       Xoshiro256& rng) {
  if (!(cfg.mask_rate >= 0.0 && cfg.mask_rate < 1.0)) {
    ThrowUsage("mask_rate must be in [0, 1)");
  }
  return ApplyMask(ids, DrawMask(ids.size(), cfg.mask_rate, rng),
                   cfg.collapse_runs);
}

std::vector<DenoisePair> MakePretrainBatch(
    const std::vector<std::string>& doc_texts, const unigram::Vocab& vocab,
    const CorruptionConfig& cfg) {
  if (cfg.max_len < 2) ThrowUsage("max_len must be at least 2");
  std::vector<DenoisePair> batch;
  batch.reserve(doc_texts.size());
  for (std::size_t index = 0; index < doc_texts.size(); ++index) {
    TokenIds ids = unigram::Encode(vocab, doc_texts[index]);
    if (ids.size() > cfg.max_len - 1) ids.resize(cfg.max_len - 1);
    const std::uint64_t seed = MixSeed(cfg.seed, index);
    Xoshiro256 rng(seed);
    DenoisePair pair = MaskTokens(ids, cfg, rng);
    pair.seed = seed;
    PadTo(pair.input_ids, cfg.max_len);
    PadTo(pair.target_ids, cfg.max_len);
    batch.push_back(std::move(pair));
  }
  return batch;
}

std::vector<DenoisePair> MakePretrainBatch(
    const std::vector<corpus::PackedDocument>& docs,
    const unigram::Vocab& vocab, const CorruptionConfig& cfg) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.Text());
  return MakePretrainBatch(texts, vocab, cfg);
}

void WriteCache(std::ostream& out, std::uint32_t max_len,
                const std::vector<DenoisePair>& pairs) {
  out.write("DNPZ", 4);
  binary_io::WriteLE<std::uint32_t>(out, kCacheVersion);
  binary_io::WriteLE<std::uint32_t>(out, max_len);
  binary_io::WriteLE<std::uint64_t>(out, pairs.size());
  for (const auto& p : pairs) {
    WriteIds(out, p.input_ids);
    WriteIds(out, p.target_ids);
  }
}

std::vector<DenoisePair> ReadCache(std::istream& in, std::uint32_t* max_len) {
  binary_io::ExpectMagic(in, "DNPZ");
  const auto version = binary_io::ReadLE<std::uint32_t>(in);
  if (version != kCacheVersion) {
    ThrowData("unsupported DNPZ version " + std::to_string(version));
  }
  const auto len = binary_io::ReadLE<std::uint32_t>(in);
  if (max_len) *max_len = len;
  const auto count = binary_io::ReadLE<std::uint64_t>(in);
  std::vector<DenoisePair> pairs;
  pairs.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    DenoisePair p;
    p.input_ids = ReadIds(in);
    p.target_ids = ReadIds(in);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace dt5::denoise
