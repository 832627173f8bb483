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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dt5::corpus {

// A sentence as whitespace-delimited words.
struct Sentence {
  std::vector<std::string> words;

  std::size_t word_count() const { return words.size(); }
  std::string Text() const;
};

struct PackedDocument {
  std::vector<Sentence> sentences;
  std::size_t total_words = 0;

  std::string Text() const;
};

struct CorpusStats {
  std::uint64_t n_documents = 0;
  std::uint64_t n_words = 0;
  double mean_words = 0.0;
  double std_words = 0.0;  // population standard deviation
};

inline constexpr std::size_t kDefaultMaxWords = 512;

// Repairs UTF-8-read-as-Latin-1 damage for the Portuguese accented letters,
// normalizes CRLF/CR to LF, collapses runs of non-LF whitespace to a single
// space, and drops NUL characters. Invalid bytes become U+FFFD. Idempotent.
std::string FixEncoding(std::string_view text);

// The mojibake table used by FixEncoding: (damaged, repaired) pairs.
const std::vector<std::pair<std::string, std::string>>& MojibakeTable();

// Whitespace-delimited words of a string.
std::vector<std::string> SplitWords(std::string_view text);

// Rule-based sentence splitter. Newlines always end a sentence; terminal
// punctuation (. ! ? and the ellipsis character) ends one when followed by
// whitespace and then an uppercase letter or an opening quote, unless the
// word is a known abbreviation.
std::vector<Sentence> SplitSentences(std::string_view text);

// Greedy in-order packing. A sentence that does not fit starts the next
// document; a sentence longer than max_words is truncated and emitted alone.
std::vector<PackedDocument> PackSentences(const std::vector<Sentence>& sentences,
                                          std::size_t max_words = kDefaultMaxWords);

// Throws dt5::Error(kData, "empty corpus") on an empty list.
CorpusStats ComputeStats(const std::vector<PackedDocument>& docs);
CorpusStats ComputeStats(const std::vector<std::size_t>& word_counts);

// Flat key=value report.
void WriteStats(const CorpusStats& stats, std::ostream& out);

// One packed document per line, words separated by single spaces.
void WritePacked(const std::vector<PackedDocument>& docs, std::ostream& out);

}  // namespace dt5::corpus
