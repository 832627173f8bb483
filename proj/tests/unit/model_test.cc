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

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "dt5/decode.h"
#include "dt5/error.h"
#include "dt5/model.h"
#include "dt5/rng.h"
#include "gradcheck.h"

namespace dt5::model {
namespace {

ModelConfig Tiny(PositionScheme scheme = PositionScheme::kLearnedAbsolute) {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 16;
  c.n_heads = 4;
  c.d_ff = 32;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.max_len = 16;
  c.position_scheme = scheme;
  c.num_buckets = 8;
  c.max_distance = 16;
  return c;
}

double MaxAbsDiff(const Matrix& a, const Matrix& b, std::size_t rows) {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < a.cols; ++c) {
      worst = std::max(worst, std::abs(a.row(r)[c] - b.row(r)[c]));
    }
  }
  return worst;
}

TEST_CASE("config validation and shapes") {
  ModelConfig c = Tiny();
  c.d_model = 8;
  c.n_heads = 2;
  CHECK(c.head_dim() == 4);
  c.n_heads = 3;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = Tiny();
  c.max_len = 0;
  CHECK_THROWS_AS(InitModel(c, 1), Error);
}

TEST_CASE("parameter count matches the shape-sum script") {
  ModelConfig c;
  c.vocab_size = 100;
  c.d_model = 16;
  c.n_heads = 4;
  c.d_ff = 32;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.max_len = 8;
  // tests/oracles/reference_values.py: embeddings, positions, layers, norms
  // and both heads.
  CHECK(InitModel(c, 0).ParameterCount() == 12339);
  c.max_len = 512;
  CHECK(InitModel(c, 0).ParameterCount() == 28467);
  c.tie_embeddings = false;
  CHECK(InitModel(c, 0).ParameterCount() == 28467 + 1600);
}

TEST_CASE("initialization is deterministic in the seed") {
  const auto a = InitModel(Tiny(), 4), b = InitModel(Tiny(), 4), c = InitModel(Tiny(), 5);
  CHECK(a.tensors.size() == b.tensors.size());
  bool same = true, differs = false;
  for (const auto& [name, t] : a.tensors) {
    same = same && t.data == b.at(name).data;
    differs = differs || t.data != c.at(name).data;
  }
  CHECK(same);
  CHECK(differs);
  for (double g : a.at("encoder/layer_0/attn_norm").data) CHECK(g == 1.0);
}

TEST_CASE("forward shape, normalization, determinism") {
  for (auto scheme : {PositionScheme::kLearnedAbsolute, PositionScheme::kRelativeBucket}) {
    auto p = InitModel(Tiny(scheme), 2);
    testing::Perturb(p, 3);
    const TokenIds enc = {4, 5, 6, 7}, dec = {1, 8, 9};
    const Matrix logits = Forward(p, enc, dec);
    CHECK(logits.rows == 3);
    CHECK(logits.cols == 20);
    for (std::size_t r = 0; r < logits.rows; ++r) {
      const auto lp = decode::LogSoftmax({logits.row(r), logits.cols});
      double s = 0.0;
      for (double x : lp) s += std::exp(x);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(Forward(p, enc, dec).data == logits.data);
    TokenIds too_long(17, 4);
    CHECK_THROWS_AS(Forward(p, too_long, dec), Error);
    const TokenIds bad = {4, 20};
    CHECK_THROWS_AS(Forward(p, bad, dec), Error);
  }
}

TEST_CASE("padding suffix on the encoder does not change logits") {
  for (auto scheme : {PositionScheme::kLearnedAbsolute, PositionScheme::kRelativeBucket}) {
    auto p = InitModel(Tiny(scheme), 6);
    testing::Perturb(p, 1);
    const TokenIds dec = {1, 8, 9, 10};
    const Matrix base = Forward(p, TokenIds{4, 5, 6}, dec);
    const Matrix padded = Forward(p, TokenIds{4, 5, 6, 0, 0, 0}, dec);
    CHECK(MaxAbsDiff(base, padded, dec.size()) < 1e-12);
  }
}

TEST_CASE("decoder is causal") {
  for (auto scheme : {PositionScheme::kLearnedAbsolute, PositionScheme::kRelativeBucket}) {
    auto p = InitModel(Tiny(scheme), 8);
    testing::Perturb(p, 2);
    const TokenIds enc = {4, 5, 6, 7, 8};
    TokenIds dec = {1, 9, 10, 11, 12};
    const Matrix base = Forward(p, enc, dec);
    for (std::size_t t = 0; t + 1 < dec.size(); ++t) {
      TokenIds edited = dec;
      for (std::size_t k = t + 1; k < dec.size(); ++k) edited[k] = 13 + static_cast<TokenId>(k);
      CHECK(MaxAbsDiff(base, Forward(p, enc, edited), t + 1) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy") {
  Matrix uniform(3, 4);
  const TokenIds targets = {1, 2, 3};
  CHECK(CrossEntropy(uniform, targets) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  Matrix sharp(2, 4);
  sharp.row(0)[2] = 200.0;
  sharp.row(1)[3] = 200.0;
  CHECK(CrossEntropy(sharp, TokenIds{2, 3}) < 1e-80);
  CHECK_THROWS_AS(CrossEntropy(uniform, TokenIds{0, 0, 0}), Error);

  // Direct log-sum-exp gather, skipping padded targets.
  Xoshiro256 rng(12);
  Matrix logits(6, 7);
  for (double& x : logits.data) x = 3.0 * rng.Normal();
  const TokenIds t = {3, 0, 6, 1, 0, 2};
  double sum = 0.0;
  int n = 0;
  for (std::size_t r = 0; r < 6; ++r) {
    if (t[r] == 0) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < 7; ++c) z += std::exp(logits.row(r)[c]);
    sum += std::log(z) - logits.row(r)[t[r]];
    ++n;
  }
  CHECK(CrossEntropy(logits, t) == doctest::Approx(sum / n).epsilon(1e-13));
}

TEST_CASE("analytic gradients match finite differences") {
  for (auto scheme : {PositionScheme::kLearnedAbsolute, PositionScheme::kRelativeBucket}) {
    for (bool tie : {true, false}) {
      ModelConfig c = Tiny(scheme);
      c.tie_embeddings = tie;
      auto p = InitModel(c, 7);
      testing::Perturb(p, 3);
      for (auto obj : {Objective::kSeq2Seq, Objective::kRegression, Objective::kClassification}) {
        const auto r = testing::CheckGradients(p, testing::GradCheckBatch(), obj, 6, 11);
        CAPTURE(r.worst_tensor);
        CHECK(r.worst < 1e-3);
      }
    }
  }
}

TEST_CASE("trainable mask and batch-mean invariance") {
  auto p = InitModel(Tiny(), 3);
  auto batch = testing::GradCheckBatch();
  const auto emb = TrainableMask::EmbeddingsOnly(p);
  auto acc = MakeAccumulator(p, emb);
  AccumulateGradients(p, batch, Objective::kSeq2Seq, emb, acc);
  REQUIRE(acc.grads.size() == 1);
  double norm = 0.0;
  for (double g : acc.grads.at(kEmbeddingName).data) norm += g * g;
  CHECK(norm > 0.0);

  const auto all = TrainableMask::All(p);
  auto single = MakeAccumulator(p, all);
  AccumulateGradients(p, batch, Objective::kSeq2Seq, all, single);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  auto twice = MakeAccumulator(p, all);
  AccumulateGradients(p, doubled, Objective::kSeq2Seq, all, twice);
  CHECK(twice.MeanLoss() == doctest::Approx(single.MeanLoss()).epsilon(1e-14));
  const auto g1 = MeanGradients(single), g2 = MeanGradients(twice);
  for (const auto& [name, t] : g1) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(std::abs(t.data[i] - g2.at(name).data[i]) <= 1e-14 * (1.0 + std::abs(t.data[i])));
    }
  }
}

TEST_CASE("mean pooling") {
  auto p = InitModel(Tiny(), 9);
  const Matrix one = EncoderStates(p, TokenIds{5});
  const auto pool = EncoderMeanPool(p, TokenIds{5});
  for (std::size_t j = 0; j < pool.size(); ++j) CHECK(pool[j] == one.row(0)[j]);
  const auto padded = EncoderMeanPool(p, TokenIds{5, 0, 0});
  for (std::size_t j = 0; j < pool.size(); ++j) CHECK(padded[j] == doctest::Approx(pool[j]).epsilon(1e-12));
  const Matrix two = EncoderStates(p, TokenIds{5, 6});
  const auto pool2 = EncoderMeanPool(p, TokenIds{5, 6});
  for (std::size_t j = 0; j < pool2.size(); ++j) {
    CHECK(pool2[j] == doctest::Approx((two.row(0)[j] + two.row(1)[j]) / 2.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(EncoderMeanPool(p, TokenIds{0, 0}), Error);
}

TEST_CASE("regression head") {
  const std::vector<double> w = {1.0};
  CHECK(RegressionHead(std::vector<double>{0.0}, w, 0.0) == 3.0);
  CHECK(RegressionHead(std::vector<double>{std::log(3.0)}, w, 0.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(RegressionHead(std::vector<double>{-800.0}, w, 0.0) == 1.0);
  CHECK(RegressionHead(std::vector<double>{800.0}, w, 0.0) == 5.0);
  Xoshiro256 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double y = RegressionHead(std::vector<double>{50.0 * rng.Normal()}, w, 0.0);
    CHECK(y >= 1.0);
    CHECK(y <= 5.0);
  }
}

TEST_CASE("classification head") {
  const std::vector<double> pool = {1.0};
  std::vector<double> w = {0.0, 0.0};
  std::array<double, 2> b = {0.3, 0.3};
  auto pr = ClassificationHead(pool, w, b);
  CHECK(pr[0] == 0.5);
  CHECK(pr[1] == 0.5);
  b = {0.2, 0.2 + std::log(3.0)};
  pr = ClassificationHead(pool, w, b);
  CHECK(pr[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(pr[1] == doctest::Approx(0.75).epsilon(1e-14));
  Xoshiro256 rng(6);
  for (int i = 0; i < 200; ++i) {
    w = {rng.Normal(), rng.Normal()};
    b = {10 * rng.Normal(), 10 * rng.Normal()};
    pr = ClassificationHead(std::vector<double>{rng.Normal()}, w, b);
    CHECK(std::abs(pr[0] + pr[1] - 1.0) < 1e-9);
  }
}

}  // namespace
}  // namespace dt5::model
