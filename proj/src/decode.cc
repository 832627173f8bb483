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
#include "dt5/decode.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dt5/error.h"

namespace dt5::decode {

double Hypothesis::Score() const {
  if (tokens.empty()) return 0.0;
  return log_prob / static_cast<double>(tokens.size());
}

bool RanksBefore(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.Score();
  const double sb = b.Score();
  if (sa != sb) return sa > sb;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

TokenIds GreedySearch(const NextLogProbs& scorer, std::size_t max_out,
                      TokenId eos_id) {
  if (max_out < 1) ThrowUsage("max_out must be at least 1");
  TokenIds out;
  while (out.size() < max_out) {
    const std::vector<double> lp = scorer(out);
    const auto best = std::max_element(lp.begin(), lp.end());  // first max wins
    const auto id = static_cast<TokenId>(best - lp.begin());
    out.push_back(id);
    if (id == eos_id) break;
  }
  return out;
}

Hypothesis BeamSearch(const NextLogProbs& scorer, std::size_t width,
                      std::size_t max_out, TokenId eos_id) {
  if (width < 1) ThrowUsage("beam width must be at least 1");
  if (max_out < 1) ThrowUsage("max_out must be at least 1");
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < max_out && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : alive) {
      const std::vector<double> lp = scorer(h.tokens);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (std::isinf(lp[v]) && lp[v] < 0) continue;
        Hypothesis c = h;
        c.tokens.push_back(static_cast<TokenId>(v));
        c.log_prob += lp[v];
        c.finished = static_cast<TokenId>(v) == eos_id;
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), RanksBefore);
    alive.clear();
    if (candidates.size() > width) candidates.resize(width);
    for (Hypothesis& c : candidates) {
      if (c.finished) {
        finished.push_back(std::move(c));
      } else {
        alive.push_back(std::move(c));
      }
    }
  }
  for (Hypothesis& h : alive) finished.push_back(std::move(h));
  return *std::min_element(finished.begin(), finished.end(), RanksBefore);
}

NextLogProbs ModelScorer(const model::ModelParams& params,
                         std::span<const TokenId> enc_ids) {
  auto enc = std::make_shared<model::EncoderOutput>(model::Encode(params, enc_ids));
  const model::ModelParams* p = &params;
  return [p, enc](std::span<const TokenId> prefix) {
    TokenIds dec;
    dec.reserve(prefix.size() + 1);
    dec.push_back(p->config.decoder_start_id);
    dec.insert(dec.end(), prefix.begin(), prefix.end());
    const model::Matrix logits = model::DecoderLogits(*p, *enc, dec);
    return LogSoftmax({logits.row(logits.rows - 1), logits.cols});
  };
}

TokenIds GreedyDecode(const model::ModelParams& params,
                      std::span<const TokenId> enc_ids, std::size_t max_out) {
  return GreedySearch(ModelScorer(params, enc_ids),
                      std::min<std::size_t>(max_out, params.config.max_len),
                      unigram::kEosId);
}

TokenIds BeamDecode(const model::ModelParams& params,
                    std::span<const TokenId> enc_ids, std::size_t width,
                    std::size_t max_out) {
  return BeamSearch(ModelScorer(params, enc_ids), width,
                    std::min<std::size_t>(max_out, params.config.max_len),
                    unigram::kEosId)
      .tokens;
}

}  // namespace dt5::decode
