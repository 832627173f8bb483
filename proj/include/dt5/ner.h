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

// Parsing generated "words [Label]" strings back into BIO tags, merging
// sliding-window predictions and exact-span entity scoring.

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dt5/tasks.h"

namespace dt5::ner {

using tasks::BioSequence;
using tasks::EntityClass;
using tasks::Tag;

struct TaggedSegment {
  std::vector<std::string> words;
  EntityClass cls = EntityClass::kOther;
  bool operator==(const TaggedSegment&) const = default;
};

struct ParseResult {
  std::vector<TaggedSegment> segments;
  bool dangling = false;       // trailing words without a label
  bool unknown_label = false;  // some label was not recognized
  bool empty_segment = false;  // some label had no words before it
};

ParseResult ParseTaggedOutput(std::string_view text);

struct AlignResult {
  BioSequence tags;
  bool overflow = false;  // generated more words than the input has
};

// Positional alignment: the k-th generated word labels the k-th input word.
AlignResult ToBio(std::span<const TaggedSegment> segments,
                  std::span<const std::string> input_words);

// I-X after O or another class becomes B-X.
BioSequence RepairBio(BioSequence tags);

struct WindowTags {
  std::size_t offset = 0;
  BioSequence tags;
};

// Each position takes its tag from the window where its distance to the
// nearer window edge is largest (earlier window on ties), then the result is
// BIO-repaired. Throws kData when some position is not covered.
BioSequence MergeWindows(std::span<const WindowTags> windows, std::size_t doc_len);

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  EntityClass cls = EntityClass::kOther;
  auto operator<=>(const EntitySpan&) const = default;
};

std::vector<EntitySpan> ExtractEntities(std::span<const Tag> tags);

struct Prf {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct NerReport {
  std::array<Prf, tasks::kNumEntityClasses> per_class;
  Prf micro;
};

// P = correct/predicted, R = correct/gold, each 0 when its denominator is 0;
// F1 is their harmonic mean (0 when both are 0).
Prf MakePrf(std::size_t gold, std::size_t predicted, std::size_t correct);

NerReport EntityPrf(std::span<const EntitySpan> gold,
                    std::span<const EntitySpan> pred);
// Adds counts of another report (documents are scored independently and
// pooled).
NerReport Combine(const NerReport& a, const NerReport& b);

// Flat key=value lines.
void WriteReport(const NerReport& report, std::ostream& out);
// Tab-separated table: class, precision, recall, F1 (percent, one decimal),
// one row per class then the micro row.
void WriteTable(const NerReport& report, std::ostream& out);
// word, gold tag, predicted tag per line; blank line between documents.
void WriteConllPredictions(std::span<const std::string> words,
                           std::span<const Tag> gold, std::span<const Tag> pred,
                           std::ostream& out);

}  // namespace dt5::ner
