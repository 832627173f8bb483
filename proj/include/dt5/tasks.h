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

// Text-to-text formatting for the sentence-pair and NER tasks, score
// rendering/parsing, BIO tags, accent stripping, sliding windows and the
// TSV / CoNLL readers.

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dt5/unigram.h"

namespace dt5::tasks {

using unigram::TokenId;
using unigram::TokenIds;

// ---- sentence pairs --------------------------------------------------------

enum class Entailment { kEntail = 0, kNone = 1 };

const char* EntailmentName(Entailment e);
Entailment ParseEntailment(std::string_view text);

struct SentencePair {
  std::string id;
  std::string sentence1;
  std::string sentence2;
  std::optional<double> similarity;
  std::optional<Entailment> entailment;
};

// Header row then id, sentence1, sentence2, similarity, entailment per line.
// Empty label cells mean "absent". Malformed input throws kData.
std::vector<SentencePair> ReadPairsTsv(std::istream& in);
void WritePairsTsv(std::ostream& out, std::span<const SentencePair> pairs);

// Text segments, each followed by an eos id once tokenized.
std::vector<std::string> AssinSegments(std::string_view s1, std::string_view s2);
TokenIds EncodeSegments(const unigram::Vocab& vocab,
                        std::span<const std::string> segments);
TokenIds FormatAssinPair(const unigram::Vocab& vocab, std::string_view s1,
                         std::string_view s2);

// One decimal digit, ties to even. Throws kUsage outside [1, 5].
std::string RenderScore(double score);
TokenIds MakeSimilarityTarget(double score, const unigram::Vocab& vocab);

struct ScoreParse {
  double value = 3.0;
  bool failed = false;
};

// First decimal number in text (comma accepted as the decimal mark),
// clamped to [1, 5]; 3.0 with failed set when nothing matches.
ScoreParse ParseScoreText(std::string_view text);
// Decodes at most the first 5 generated ids, then parses.
ScoreParse ParseScoreString(std::span<const TokenId> generated,
                            const unigram::Vocab& vocab);

inline constexpr std::size_t kScoreTokens = 5;

// ---- NER -------------------------------------------------------------------

enum class EntityClass { kPerson, kOrganization, kLocation, kValue, kDate, kOther };
inline constexpr std::size_t kNumEntityClasses = 5;  // excluding Other
inline constexpr std::array<EntityClass, kNumEntityClasses> kEntityClasses = {
    EntityClass::kPerson, EntityClass::kOrganization, EntityClass::kLocation,
    EntityClass::kValue, EntityClass::kDate};

enum class LabelLanguage { kPortuguese, kEnglish };
LabelLanguage ParseLabelLanguage(std::string_view name);

// Label written after each segment in generated targets.
const std::string& ClassLabel(EntityClass cls, LabelLanguage lang);
// Accepts the labels of either language, accent-stripped spellings and a few
// aliases. Matching ignores case.
std::optional<EntityClass> ParseClassLabel(std::string_view label);
// Short tag code (PER, ORG, LOC, VAL, DATE) and report row name.
const char* TagCode(EntityClass cls);
const char* ClassName(EntityClass cls);

struct Tag {
  char prefix = 'O';  // 'B', 'I' or 'O'
  EntityClass cls = EntityClass::kOther;

  bool operator==(const Tag&) const = default;
  static Tag Outside() { return {}; }
  static Tag Begin(EntityClass c) { return {'B', c}; }
  static Tag Inside(EntityClass c) { return {'I', c}; }
};

using BioSequence = std::vector<Tag>;

std::string TagString(const Tag& tag);
// "O", "B-PER", "I-LOC", ... Also accepts the Portuguese HAREM codes
// (PESSOA, ORGANIZACAO, LOCAL, VALOR, TEMPO). Throws kData on anything else.
Tag ParseTag(std::string_view text);
bool IsValidBio(std::span<const Tag> tags);

struct NerDocument {
  std::string doc_id;
  std::vector<std::string> words;
  BioSequence tags;
};

// "word<TAB or space>tag" lines, blank line between documents. Lines starting
// with "#" are ignored. Throws kData on malformed lines or invalid BIO.
std::vector<NerDocument> ReadConll(std::istream& in);

std::string FormatNerInputText(std::span<const std::string> words);
TokenIds FormatNerInput(const unigram::Vocab& vocab,
                        std::span<const std::string> words);

// Words with a "[Label]" after each segment: an entity (B then its I
// continuation) or a maximal run of O words. Throws kData on invalid BIO.
std::string BuildNerTarget(std::span<const std::string> words,
                           std::span<const Tag> tags, LabelLanguage lang);

// Replaces accented Latin letters with their unaccented base letters.
std::string StripAccents(std::string_view text);

// Window offsets over a sequence of the given length.
std::vector<std::size_t> SlidingWindowOffsets(std::size_t length,
                                              std::size_t size = 512,
                                              std::size_t stride = 256);

struct WindowedExample {
  std::string parent;
  std::size_t offset = 0;
  TokenIds ids;
};

std::vector<WindowedExample> SlidingWindows(const std::string& parent,
                                            std::span<const TokenId> ids,
                                            std::size_t size = 512,
                                            std::size_t stride = 256);

}  // namespace dt5::tasks
