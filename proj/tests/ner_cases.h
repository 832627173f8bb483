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

// Random BIO sequences and an enumerator of small generated outputs, shared by
// the NER unit tests and the acceptance run.

#include <functional>
#include <string>
#include <vector>

#include "dt5/ner.h"
#include "dt5/rng.h"
#include "dt5/tasks.h"

namespace dt5::testing {

inline tasks::BioSequence RandomBio(Xoshiro256& rng, std::size_t n, std::size_t classes = 5) {
  tasks::BioSequence tags;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rng.Below(3);
    const auto cls = tasks::kEntityClasses[rng.Below(classes)];
    if (r == 0) {
      tags.push_back(tasks::Tag::Outside());
    } else if (r == 1 || tags.empty() || tags.back().prefix == 'O') {
      tags.push_back(tasks::Tag::Begin(cls));
    } else {
      tags.push_back(tasks::Tag::Inside(tags.back().cls));
    }
  }
  return tags;
}

inline std::vector<std::string> RandomWords(Xoshiro256& rng, std::size_t n) {
  static const std::vector<std::string> pool = {"ana", "foi", "a", "São", "Paulo",
                                                "em", "2020", "R$", "5,00", "Petrobras"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.Below(pool.size())]);
  return out;
}

// One generated output: its text and the segments it should parse into.
struct GeneratedCase {
  std::string text;
  std::vector<ner::TaggedSegment> segments;
  bool dangling = false;
};

// Every output of up to max_words generated words g0 g1 ..., over every way
// to split them into labelled segments, with and without an unlabelled tail.
inline void ForEachGeneratedOutput(std::size_t max_words,
                                   const std::vector<tasks::EntityClass>& labels,
                                   const std::function<void(const GeneratedCase&)>& visit) {
  for (std::size_t k = 0; k <= max_words; ++k) {
    const std::size_t split_codes = k ? (std::size_t{1} << (k - 1)) : 1;
    for (std::size_t splits = 0; splits < split_codes; ++splits) {
      std::vector<std::size_t> sizes;
      if (k) {
        sizes.push_back(1);
        for (std::size_t g = 0; g + 1 < k; ++g) {
          if (splits >> g & 1) sizes.push_back(1);
          else ++sizes.back();
        }
      }
      std::size_t combos = 1;
      for (std::size_t s = 0; s < sizes.size(); ++s) combos *= labels.size();
      for (std::size_t code = 0; code < combos; ++code) {
        for (bool dangling : {false, true}) {
          if (dangling && sizes.empty()) continue;
          GeneratedCase gc;
          gc.dangling = dangling;
          std::size_t c = code, w = 0;
          for (std::size_t s = 0; s < sizes.size(); ++s) {
            ner::TaggedSegment seg;
            for (std::size_t j = 0; j < sizes[s]; ++j) {
              seg.words.push_back("g" + std::to_string(w++));
              gc.text += seg.words.back() + " ";
            }
            seg.cls = labels[c % labels.size()];
            c /= labels.size();
            if (dangling && s + 1 == sizes.size()) {
              seg.cls = tasks::EntityClass::kOther;
            } else {
              gc.text += "[" + tasks::ClassLabel(seg.cls, tasks::LabelLanguage::kEnglish) + "] ";
            }
            gc.segments.push_back(std::move(seg));
          }
          visit(gc);
        }
      }
    }
  }
}

}  // namespace dt5::testing
