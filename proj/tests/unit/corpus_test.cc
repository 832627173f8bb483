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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dt5/corpus.h"
#include "dt5/error.h"
#include "dt5/rng.h"

namespace dt5::corpus {
namespace {

Sentence Words(std::size_t n) {
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) s.words.push_back("w" + std::to_string(i));
  return s;
}

std::vector<std::size_t> Counts(const std::vector<PackedDocument>& docs) {
  std::vector<std::size_t> out;
  for (const auto& d : docs) out.push_back(d.total_words);
  return out;
}

TEST_CASE("fix encoding repairs mojibake and whitespace") {
  CHECK(FixEncoding("S\xC3\x83\xC2\xA3o Paulo") == "S\xC3\xA3o Paulo");
  CHECK(FixEncoding("plain ascii") == "plain ascii");
  CHECK(FixEncoding("a\r\nb") == "a\nb");
  CHECK(FixEncoding("a\rb") == "a\nb");
  CHECK(FixEncoding("a \t  b\n\nc") == "a b\n\nc");
  CHECK(FixEncoding(std::string("a\0b", 3)) == "ab");
}

TEST_CASE("mojibake table covers the accented set both cases") {
  // Damaged form = UTF-8 bytes of the letter read back as Latin-1.
  const std::u32string letters = U"ãõáéíóúâêôàçÃÕÁÉÍÓÚÂÊÔÀÇ";
  for (char32_t c : letters) {
    std::string good;
    if (c < 0x80) good.push_back(static_cast<char>(c));
    else {
      good.push_back(static_cast<char>(0xC0 | (c >> 6)));
      good.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
    std::string damaged;
    for (unsigned char byte : good) {
      damaged.push_back(static_cast<char>(0xC0 | (byte >> 6)));
      damaged.push_back(static_cast<char>(0x80 | (byte & 0x3F)));
    }
    CAPTURE(good);
    CHECK(FixEncoding(damaged) == good);
    CHECK(FixEncoding("x" + damaged + "y") == "x" + good + "y");
  }
  CHECK(MojibakeTable().size() == letters.size());
}

TEST_CASE("fix encoding is idempotent") {
  Xoshiro256 rng(9);
  const std::vector<std::string> parts = {"a", " ", "\t", "\r\n", "\r", "\n", "S\xC3\x83\xC2\xA3",
                                          "\xC3\x83", "\xC2\xA3", "\xC3\xA7", "  "};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t n = rng.Below(12);
    for (std::size_t i = 0; i < n; ++i) s += parts[rng.Below(parts.size())];
    const std::string once = FixEncoding(s);
    CHECK(FixEncoding(once) == once);
  }
}

TEST_CASE("sentence splitting") {
  auto texts = [](const std::vector<Sentence>& ss) {
    std::vector<std::string> out;
    for (const auto& s : ss) out.push_back(s.Text());
    return out;
  };
  CHECK(texts(SplitSentences("Olá. Tudo bem?")) == std::vector<std::string>{"Olá.", "Tudo bem?"});
  CHECK(texts(SplitSentences("Dr. Silva chegou.")) == std::vector<std::string>{"Dr. Silva chegou."});
  CHECK(texts(SplitSentences("a\nb")) == std::vector<std::string>{"a", "b"});
  CHECK(texts(SplitSentences("Ele disse. \"Vamos!\" E foi.")) ==
        std::vector<std::string>{"Ele disse.", "\"Vamos!\"", "E foi."});
  CHECK(texts(SplitSentences("valor 3.5 mil. fim")) == std::vector<std::string>{"valor 3.5 mil. fim"});
  CHECK(SplitSentences("\n\n  \n").empty());
}

TEST_CASE("split never loses non-whitespace characters") {
  Xoshiro256 rng(4);
  const std::vector<std::string> parts = {"Olá", "mundo", ".", "!", "?", " ", "\n", "Sr.", "A", "\"B"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    for (std::size_t i = 0, n = rng.Below(15); i < n; ++i) s += parts[rng.Below(parts.size())];
    std::string joined;
    for (const auto& sent : SplitSentences(s)) {
      CHECK(sent.word_count() >= 1);
      joined += sent.Text() + " ";
    }
    std::string a, b;
    for (char c : s) if (!std::isspace(static_cast<unsigned char>(c))) a += c;
    for (char c : joined) if (!std::isspace(static_cast<unsigned char>(c))) b += c;
    CHECK(a == b);
  }
}

TEST_CASE("packing examples") {
  CHECK(Counts(PackSentences({Words(300), Words(300), Words(100)})) ==
        std::vector<std::size_t>{300, 400});
  auto one = PackSentences({Words(600)});
  REQUIRE(one.size() == 1);
  CHECK(one[0].total_words == 512);
  CHECK(one[0].sentences[0].words.back() == "w511");
  CHECK(Counts(PackSentences({Words(512), Words(1)})) == std::vector<std::size_t>{512, 1});
  CHECK(PackSentences({}).empty());
}

TEST_CASE("packing is greedy, bounded and order preserving") {
  Xoshiro256 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t max_words = 1 + rng.Below(40);
    std::vector<Sentence> sents;
    std::vector<std::string> expected;
    for (std::size_t i = 0, n = rng.Below(30); i < n; ++i) {
      Sentence s = Words(1 + rng.Below(50));
      for (auto& w : s.words) w += "_" + std::to_string(i);
      for (std::size_t k = 0; k < std::min(s.words.size(), max_words); ++k) {
        expected.push_back(s.words[k]);
      }
      sents.push_back(s);
    }
    const auto docs = PackSentences(sents, max_words);
    std::vector<std::string> got;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::size_t total = 0;
      for (const auto& s : docs[d].sentences) {
        total += s.word_count();
        got.insert(got.end(), s.words.begin(), s.words.end());
      }
      CHECK(total == docs[d].total_words);
      CHECK(total <= max_words);
      if (d + 1 < docs.size()) {
        const std::size_t next = docs[d + 1].sentences.front().word_count();
        CHECK(total + next > max_words);
      }
    }
    CHECK(got == expected);
  }
}

TEST_CASE("corpus statistics") {
  auto s = ComputeStats(std::vector<std::size_t>{360, 360});
  CHECK(s.mean_words == 360.0);
  CHECK(s.std_words == 0.0);
  s = ComputeStats(std::vector<std::size_t>{100, 300});
  CHECK(s.n_documents == 2);
  CHECK(s.n_words == 400);
  CHECK(s.mean_words == 200.0);
  CHECK(s.std_words == 100.0);
  CHECK_THROWS_AS(ComputeStats(std::vector<std::size_t>{}), Error);

  // Document lengths 1 + (Next() % 512) from Xoshiro256(2024); totals
  // recounted by tests/oracles/reference_values.py.
  Xoshiro256 rng(2024);
  std::vector<std::size_t> counts;
  for (int i = 0; i < 1000; ++i) counts.push_back(1 + rng.Next() % 512);
  std::vector<PackedDocument> docs;
  for (std::size_t c : counts) docs.push_back(PackSentences({Words(c)}).front());
  s = ComputeStats(docs);
  CHECK(s.n_documents == 1000);
  CHECK(s.n_words == 258697);
  CHECK(s.mean_words == doctest::Approx(258.697).epsilon(1e-15));
  CHECK(s.std_words == doctest::Approx(147.39437978091308).epsilon(1e-12));

  std::ostringstream out;
  WriteStats(ComputeStats(std::vector<std::size_t>{100, 300}), out);
  CHECK(out.str().find("n_documents=2") != std::string::npos);
}

}  // namespace
}  // namespace dt5::corpus
