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

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.h"
#include "doctest.h"
#include "dt5/error.h"
#include "dt5/rng.h"
#include "dt5/unigram.h"
#include "dt5/utf8.h"
#include "synthetic.h"

namespace dt5::unigram {
namespace {

Vocab Toy(std::vector<std::pair<std::string, double>> probs) {
  std::vector<Piece> pieces;
  for (auto& [t, p] : probs) pieces.push_back({t, std::log(p)});
  return Vocab::FromPieces(pieces);
}

std::vector<std::string> Texts(const Vocab& v, const TokenIds& ids) {
  std::vector<std::string> out;
  for (auto id : ids) out.push_back(v.piece(id).text);
  return out;
}

Vocab RandomVocab(Xoshiro256& rng, const std::string& alphabet, std::size_t max_pieces) {
  std::set<std::string> texts;
  for (char c : alphabet) texts.insert(std::string(1, c));
  const std::size_t target = alphabet.size() + rng.Below(max_pieces - alphabet.size() + 1);
  while (texts.size() < target) {
    std::string s;
    for (std::size_t k = 0, n = 2 + rng.Below(3); k < n; ++k) s += alphabet[rng.Below(alphabet.size())];
    texts.insert(s);
  }
  std::vector<Piece> pieces;
  // Log-probs from a coarse grid so that exact ties actually occur.
  for (const auto& t : texts) pieces.push_back({t, -0.5 * static_cast<double>(1 + rng.Below(8))});
  return Vocab::FromPieces(pieces);
}

TEST_CASE("reserved ids") {
  Vocab v;
  REQUIRE(v.size() == 4);
  CHECK(v.piece(kPadId).text == "<pad>");
  CHECK(v.piece(kEosId).text == "</s>");
  CHECK(v.piece(kUnkId).text == "<unk>");
  CHECK(v.piece(kMaskId).text == "<M>");
  CHECK_THROWS_AS(Vocab::FromPieces({{"<M>", -1.0}}), Error);
  CHECK_THROWS_AS(Vocab::FromPieces({{"a", -1.0}, {"a", -2.0}}), Error);
}

TEST_CASE("seed vocabulary") {
  std::vector<std::string> c1 = {"aa"};
  Vocab v = BuildSeedVocab(c1, 3);
  CHECK(v.Find("a").has_value());
  CHECK(v.Find("aa").has_value());
  std::vector<std::string> c2 = {"ab", "ab"};
  v = BuildSeedVocab(c2, 4);
  // a, b and ab each occur twice: 2 / 6.
  REQUIRE(v.Find("ab").has_value());
  CHECK(v.piece(*v.Find("ab")).log_prob == doctest::Approx(std::log(2.0 / 6.0)));
  CHECK_THROWS_AS(BuildSeedVocab(c2, 1), Error);
}

TEST_CASE("seed vocabulary keeps every character") {
  const auto docs = testing::GrammarDocuments(300, 8);
  const Vocab v = BuildSeedVocab(docs, 8000);
  const TrainingCorpus corpus = BuildTrainingCorpus(docs);
  for (char32_t c : corpus.characters) {
    CHECK(v.Find(utf8::Encode(std::u32string(1, c))).has_value());
  }
}

TEST_CASE("em step hand cases") {
  std::vector<std::string> c = {"aaa"};
  Vocab v = Toy({{"a", 1.0}});
  EmResult r = EmStep(BuildTrainingCorpus(c), v);
  CHECK(r.log_likelihood == 0.0);
  CHECK(r.vocab.piece(4).log_prob == 0.0);

  c = {"aa"};
  v = Toy({{"a", 0.5}, {"aa", 0.5}});
  const ExpectedCounts ec = ComputeExpectedCounts(BuildTrainingCorpus(c), v);
  // Paths: "aa" with 0.5, "a a" with 0.25; posteriors 2/3 and 1/3.
  CHECK(ec.counts[*v.Find("aa")] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(ec.counts[*v.Find("a")] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(ec.log_likelihood == doctest::Approx(std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("forward-backward counts equal enumeration") {
  Xoshiro256 rng(50);
  const Vocab v = RandomVocab(rng, "abc", 14);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string s;
    for (std::size_t k = 0, n = 1 + rng.Below(10); k < n; ++k) s += "abc"[rng.Below(3)];
    corpus.push_back(s);
  }
  const auto [counts, ll] = oracle::EnumeratedCounts(v, corpus);
  const ExpectedCounts ec = ComputeExpectedCounts(BuildTrainingCorpus(corpus), v);
  for (std::size_t id = 0; id < v.size(); ++id) {
    CHECK(std::abs(ec.counts[id] - counts[id]) <= 1e-10 * std::max(1.0, counts[id]));
  }
  CHECK(ec.log_likelihood == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("em never decreases likelihood") {
  const auto docs = testing::GrammarDocuments(100, 2);
  const TrainingCorpus corpus = BuildTrainingCorpus(docs);
  Vocab v = BuildSeedVocab(corpus, 400);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 10; ++it) {
    EmResult r = EmStep(corpus, v);
    CHECK(r.log_likelihood >= prev - 1e-9 * std::abs(prev));
    prev = r.log_likelihood;
    v = std::move(r.vocab);
  }
}

TEST_CASE("pruning") {
  std::vector<std::string> c = {"abab", "ab"};
  const TrainingCorpus corpus = BuildTrainingCorpus(c);
  Vocab v = Toy({{"a", 0.2}, {"b", 0.2}, {"ab", 0.5}, {"xy", 0.1}});
  CHECK(PruneVocab(corpus, v, v.size()).pieces().size() == v.size());
  const Vocab pruned = PruneVocab(corpus, v, v.size() - 1);
  CHECK(pruned.size() == v.size() - 1);
  CHECK(!pruned.Find("xy").has_value());
  CHECK(pruned.Find("ab").has_value());
  CHECK_THROWS_AS(PruneVocab(corpus, v, 5), Error);

  const auto docs = testing::GrammarDocuments(200, 3);
  const TrainingCorpus big = BuildTrainingCorpus(docs);
  const Vocab seed = BuildSeedVocab(big, 8000);
  CHECK(PruneVocab(big, seed, 300).size() == 300);
}

TEST_CASE("training") {
  std::vector<std::string> c(20, "abab");
  TrainerOptions opt;
  opt.vocab_size = 10;
  Vocab v = TrainVocab(c, opt);
  REQUIRE(v.Find("ab").has_value());
  const double ba = v.Find("ba") ? v.piece(*v.Find("ba")).log_prob : -INFINITY;
  CHECK(v.piece(*v.Find("ab")).log_prob > ba);

  std::vector<std::string> single = {"a"};
  v = TrainVocab(single, opt);
  REQUIRE(v.size() == 5);
  CHECK(v.piece(4).text == "a");

  const auto docs = testing::GrammarDocuments(100, 5);
  opt.vocab_size = 80;
  std::ostringstream a, b;
  Vocab v1 = TrainVocab(docs, opt);
  v1.Save(a);
  TrainVocab(docs, opt).Save(b);
  CHECK(a.str() == b.str());
  CHECK(v1.size() == 80);
  double total = 0.0;
  for (std::size_t id = kNumReserved; id < v1.size(); ++id) {
    CHECK(v1.pieces()[id].log_prob < 0.0);
    total += std::exp(v1.pieces()[id].log_prob);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  std::istringstream in(a.str());
  std::ostringstream again;
  Vocab::Load(in).Save(again);
  CHECK(again.str() == a.str());
}

TEST_CASE("encode examples") {
  Vocab v = Toy({{"a", 0.5}, {"b", 0.25}, {"ab", 0.25}});
  CHECK(Texts(v, Encode(v, "ab")) == std::vector<std::string>{"ab"});
  CHECK(Encode(v, "").empty());
  CHECK(Encode(v, "az") == TokenIds{*v.Find("a"), kUnkId});
}

TEST_CASE("viterbi equals exhaustive best segmentation") {
  Xoshiro256 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const Vocab v = RandomVocab(rng, "abc", 20);
    std::string s;
    for (std::size_t k = 0, n = rng.Below(13); k < n; ++k) s += "abc"[rng.Below(3)];
    CAPTURE(s);
    CHECK(Encode(v, s) == oracle::BestSplit(v, s).ids);
  }
}

TEST_CASE("decode") {
  const auto docs = testing::GrammarDocuments(50, 6);
  TrainerOptions opt;
  opt.vocab_size = 60;
  const Vocab v = TrainVocab(docs, opt);
  CHECK(Decode(v, Encode(v, "o gato viu a bola")) == "o gato viu a bola");
  CHECK(Decode(v, {}) == "");
  const TokenIds bad = {static_cast<TokenId>(v.size())};
  CHECK_THROWS_AS(Decode(v, bad), Error);
  for (const auto& d : docs) {
    const TokenIds ids = Encode(v, d);
    CHECK(Decode(v, ids) == d);
    for (TokenId id : ids) CHECK(id >= static_cast<TokenId>(kNumReserved));
  }
  TokenIds padded = Encode(v, "o rio");
  padded.push_back(kEosId);
  padded.push_back(kPadId);
  CHECK(Decode(v, padded) == "o rio");
}

}  // namespace
}  // namespace dt5::unigram
