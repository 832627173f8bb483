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

// Random prefix-conditioned next-token tables used as toy decoders.

#include <vector>

#include "dt5/decode.h"
#include "dt5/rng.h"

namespace dt5::testing {

// Logits are scale * N(0, 1) per token, drawn from a generator seeded by
// (seed, prefix), so every prefix has a fixed distribution regardless of
// query order.
inline decode::NextLogProbs ToyDecoder(std::uint64_t seed, std::size_t vocab,
                                       double scale = 1.0) {
  return [seed, vocab, scale](std::span<const unigram::TokenId> prefix) {
    std::uint64_t key = 0x1234567;
    for (unigram::TokenId t : prefix) key = MixSeed(key, static_cast<std::uint64_t>(t) + 1);
    Xoshiro256 rng(MixSeed(seed, key ^ prefix.size()));
    std::vector<double> logits(vocab);
    for (double& x : logits) x = scale * rng.Normal();
    return decode::LogSoftmax(logits);
  };
}

}  // namespace dt5::testing
