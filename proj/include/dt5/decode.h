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

// Greedy and beam-search generation. The search routines are generic over a
// next-token scorer so they can run against the model or a toy table.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dt5/model.h"

namespace dt5::decode {

using unigram::TokenId;
using unigram::TokenIds;

// Returns log-probabilities over the vocabulary for the token following
// prefix (prefix excludes the decoder start token).
using NextLogProbs = std::function<std::vector<double>(std::span<const TokenId> prefix)>;

struct Hypothesis {
  TokenIds tokens;        // generated ids, including a final eos when finished
  double log_prob = 0.0;  // cumulative
  bool finished = false;

  // Length-normalized score: cumulative log-prob divided by token count.
  double Score() const;
};

// Total order used for ranking: higher score, then shorter, then
// lexicographically smaller ids. Returns true when a ranks before b.
bool RanksBefore(const Hypothesis& a, const Hypothesis& b);

// Argmax at each step until eos or max_out tokens; ties go to the lowest id.
TokenIds GreedySearch(const NextLogProbs& scorer, std::size_t max_out,
                      TokenId eos_id);

// Each step ranks every extension of the open hypotheses and keeps the top
// width; kept candidates ending in eos are retired to the finished pool and
// shrink the open beam. Hypotheses still open after max_out steps compete
// unfinished. Width 1 reproduces GreedySearch.
Hypothesis BeamSearch(const NextLogProbs& scorer, std::size_t width,
                      std::size_t max_out, TokenId eos_id);

// Scorer backed by the encoder-decoder model for one encoder input.
NextLogProbs ModelScorer(const model::ModelParams& params,
                         std::span<const TokenId> enc_ids);

TokenIds GreedyDecode(const model::ModelParams& params,
                      std::span<const TokenId> enc_ids, std::size_t max_out);
TokenIds BeamDecode(const model::ModelParams& params,
                    std::span<const TokenId> enc_ids, std::size_t width,
                    std::size_t max_out);

std::vector<double> LogSoftmax(std::span<const double> logits);

}  // namespace dt5::decode
