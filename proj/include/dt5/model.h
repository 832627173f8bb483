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

// Small pre-normalization encoder-decoder transformer in f64 with
// hand-written backpropagation, mean-pooled encoder heads, and decoding.
//
// Architecture: RMS normalization (gain only), multi-head attention without
// biases, GELU feed-forward without biases, learned absolute positions or
// bucketed relative position biases, output projection tied to the token
// embedding unless configured otherwise. The decoder starts from
// decoder_start_id (end-of-sequence by default).
//
// Tensor names:
//   shared/embedding                       [vocab x d]
//   {encoder,decoder}/position             [max_len x d]   (absolute)
//   {encoder,decoder}/relative_bias        [buckets x heads] (relative)
//   encoder/layer_N/{attn_norm,ff_norm}    [d]
//   encoder/layer_N/attn/{q,k,v,o}         [d x d]
//   decoder/layer_N/{self_norm,cross_norm,ff_norm}
//   decoder/layer_N/{self,cross}/{q,k,v,o}
//   {encoder,decoder}/layer_N/ff/wi        [d x d_ff]
//   {encoder,decoder}/layer_N/ff/wo        [d_ff x d]
//   {encoder,decoder}/final_norm           [d]
//   lm_head                                [vocab x d]     (untied only)
//   head/regression/{w [d x 1], b [1]}
//   head/classification/{w [d x 2], b [2]}

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dt5/tensor.h"
#include "dt5/unigram.h"

namespace dt5::model {

using unigram::TokenId;
using unigram::TokenIds;

enum class PositionScheme : std::uint8_t { kLearnedAbsolute = 0, kRelativeBucket = 1 };

struct ModelConfig {
  std::uint32_t vocab_size = 0;
  std::uint32_t d_model = 64;
  std::uint32_t n_heads = 4;
  std::uint32_t d_ff = 128;
  std::uint32_t n_enc_layers = 2;
  std::uint32_t n_dec_layers = 2;
  std::uint32_t max_len = 512;
  PositionScheme position_scheme = PositionScheme::kLearnedAbsolute;
  bool tie_embeddings = true;
  std::uint32_t num_buckets = 32;
  std::uint32_t max_distance = 128;
  TokenId decoder_start_id = unigram::kEosId;

  std::uint32_t head_dim() const { return d_model / n_heads; }
  // Throws dt5::Error(kUsage) when inconsistent.
  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  ModelConfig config;
  TensorMap tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t ParameterCount() const;
};

// Names of trainable tensors. Frozen tensors get no gradient and are left
// untouched by optimizers.
class TrainableMask {
 public:
  static TrainableMask All(const ModelParams& params);
  // Only the token embedding (which also serves as the tied projection).
  static TrainableMask EmbeddingsOnly(const ModelParams& params);
  static TrainableMask Of(std::set<std::string> names);

  bool Contains(const std::string& name) const { return names_.count(name) > 0; }
  const std::set<std::string>& names() const { return names_; }

 private:
  std::set<std::string> names_;
};

inline constexpr const char* kEmbeddingName = "shared/embedding";

// Embeddings ~ N(0, 1/d_model); projections ~ U(-1/sqrt(fan_in), +);
// normalization gains 1; relative biases and head biases 0.
ModelParams InitModel(const ModelConfig& config, std::uint64_t seed);

// Row-major activation matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// Teacher-forced next-token logits [dec_ids.size() x vocab_size]. Padding
// ids are masked out as attention keys. Throws on out-of-range ids or
// lengths above max_len.
Matrix Forward(const ModelParams& params, std::span<const TokenId> enc_ids,
               std::span<const TokenId> dec_ids);

// Final (normalized) encoder states [enc_ids.size() x d_model].
// Encoder pass kept for repeated decoder calls during generation.
struct EncoderOutput {
  Matrix states;
  std::vector<bool> valid;
};

EncoderOutput Encode(const ModelParams& params, std::span<const TokenId> enc_ids);
Matrix DecoderLogits(const ModelParams& params, const EncoderOutput& enc,
                     std::span<const TokenId> dec_ids);

Matrix EncoderStates(const ModelParams& params, std::span<const TokenId> enc_ids);

// Mean of final encoder states over non-padding positions. Throws
// dt5::Error(kData) if every position is padding.
std::vector<double> EncoderMeanPool(const ModelParams& params,
                                    std::span<const TokenId> enc_ids);

// Mean token cross-entropy over positions whose target is not padding.
// Throws dt5::Error(kData) when every target is padding.
double CrossEntropy(const Matrix& logits, std::span<const TokenId> targets);

double Sigmoid(double x);
// 4 * sigmoid(w . pool + b) + 1
double RegressionHead(std::span<const double> pool, std::span<const double> w,
                      double b);
double RegressionHead(const ModelParams& params, std::span<const double> pool);
// softmax over two logits; index 0 = entail, 1 = none.
std::array<double, 2> ClassificationHead(std::span<const double> pool,
                                         std::span<const double> w_d_by_2,
                                         std::span<const double, 2> b);
std::array<double, 2> ClassificationHead(const ModelParams& params,
                                         std::span<const double> pool);

// [start] + target[0 .. n-2]
TokenIds DecoderInput(std::span<const TokenId> target, TokenId start_id);

// ---------------------------------------------------------------------------
// Training objectives and gradients.

enum class Objective { kSeq2Seq, kRegression, kClassification };

struct Example {
  TokenIds enc_ids;
  TokenIds target_ids;  // seq2seq target (padding ignored)
  double score = 0.0;   // regression target in [1, 5]
  int label = -1;       // classification target: 0 entail, 1 none
};

// Sums over examples: loss_sum is the summed loss, weight the number of
// target tokens (seq2seq) or examples (heads). grads hold d(loss_sum).
struct GradAccumulator {
  double loss_sum = 0.0;
  double weight = 0.0;
  TensorMap grads;

  double MeanLoss() const { return weight > 0.0 ? loss_sum / weight : 0.0; }
  void Reset();
};

GradAccumulator MakeAccumulator(const ModelParams& params,
                                const TrainableMask& mask);

// Adds the examples' losses and gradients to acc, one example at a time in
// order, so splitting a batch into consecutive micro-batches over the same
// accumulator yields bit-identical sums.
void AccumulateGradients(const ModelParams& params,
                         std::span<const Example> examples, Objective objective,
                         const TrainableMask& mask, GradAccumulator& acc);

// Loss only (sum and weight, as in GradAccumulator).
std::pair<double, double> LossSum(const ModelParams& params,
                                  std::span<const Example> examples,
                                  Objective objective);

// grads / weight for each tensor.
TensorMap MeanGradients(const GradAccumulator& acc);

}  // namespace dt5::model
