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
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.h"
#include "doctest.h"
#include "dt5/error.h"
#include "dt5/ner.h"
#include "dt5/rng.h"
#include "ner_cases.h"

namespace dt5::ner {
namespace {

using tasks::LabelLanguage;

BioSequence Tags(const std::vector<std::string>& codes) {
  BioSequence out;
  for (const auto& c : codes) out.push_back(tasks::ParseTag(c));
  return out;
}

using testing::RandomBio;
using testing::RandomWords;

TEST_CASE("parse tagged output") {
  const ParseResult r = ParseTaggedOutput("John [Person] lives in [Other] New York [Local]");
  const std::vector<TaggedSegment> expected = {{{"John"}, EntityClass::kPerson},
                                               {{"lives", "in"}, EntityClass::kOther},
                                               {{"New", "York"}, EntityClass::kLocation}};
  CHECK(r.segments == expected);
  CHECK(!r.dangling);
  CHECK(!r.unknown_label);

  const ParseResult empty = ParseTaggedOutput("[Person]");
  CHECK(empty.segments.empty());
  CHECK(empty.empty_segment);

  const ParseResult tail = ParseTaggedOutput("a [Pessoa] b c");
  REQUIRE(tail.segments.size() == 2);
  CHECK(tail.dangling);
  CHECK(tail.segments[1].cls == EntityClass::kOther);

  const ParseResult unknown = ParseTaggedOutput("a [Coisa]");
  CHECK(unknown.unknown_label);
  CHECK(unknown.segments[0].cls == EntityClass::kOther);
}

TEST_CASE("worked alignment example") {
  const std::vector<std::string> words = {"John", "lives", "in", "New", "York"};
  const auto segs = ParseTaggedOutput("John [Person] lives in [Other] New York [Local]").segments;
  CHECK(ToBio(segs, words).tags == Tags({"B-PER", "O", "O", "B-LOC", "I-LOC"}));
  CHECK(ToBio({}, std::vector<std::string>{"a", "b", "c"}).tags == Tags({"O", "O", "O"}));
  const AlignResult over = ToBio(segs, std::vector<std::string>{"John", "lives"});
  CHECK(over.overflow);
  CHECK(over.tags.size() == 2);
}

TEST_CASE("build then parse is the identity") {
  Xoshiro256 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.Below(20);
    const auto words = RandomWords(rng, n);
    const auto tags = RandomBio(rng, n);
    const auto lang = rng.Below(2) ? LabelLanguage::kEnglish : LabelLanguage::kPortuguese;
    const std::string target = tasks::BuildNerTarget(words, tags, lang);
    const ParseResult parsed = ParseTaggedOutput(target);
    CHECK(!parsed.dangling);
    CHECK(!parsed.unknown_label);
    std::vector<std::string> flat;
    for (const auto& s : parsed.segments) flat.insert(flat.end(), s.words.begin(), s.words.end());
    CHECK(flat == words);
    const AlignResult a = ToBio(parsed.segments, words);
    CHECK(!a.overflow);
    CHECK(a.tags == tags);
  }
}

TEST_CASE("aligner equals the reference on all small outputs") {
  const std::vector<EntityClass> labels = {EntityClass::kPerson, EntityClass::kLocation,
                                           EntityClass::kOther};
  const std::vector<std::string> input_pool = {"i0", "i1", "i2", "i3", "i4"};
  std::size_t cases = 0;
  testing::ForEachGeneratedOutput(5, labels, [&](const testing::GeneratedCase& gc) {
    const ParseResult parsed = ParseTaggedOutput(gc.text);
    CHECK(parsed.dangling == gc.dangling);
    CHECK(parsed.segments == gc.segments);
    std::size_t k = 0;
    for (const auto& s : gc.segments) k += s.words.size();
    for (std::size_t n = 0; n <= 5; ++n) {
      const std::vector<std::string> input(input_pool.begin(), input_pool.begin() + n);
      const AlignResult got = ToBio(parsed.segments, input);
      CHECK(got.tags == oracle::ReferenceAlign(gc.segments, n));
      CHECK(got.overflow == (k > n));
      ++cases;
    }
  });
  CHECK(cases > 1000);
}

TEST_CASE("bio repair") {
  CHECK(RepairBio(Tags({"I-PER", "I-PER", "O", "I-LOC", "B-PER", "I-LOC"})) ==
        Tags({"B-PER", "I-PER", "O", "B-LOC", "B-PER", "B-LOC"}));
}

TEST_CASE("window merge") {
  // Word 300: distance to the nearer edge is 211 in [0, 512) and 44 in
  // [256, 768), so the first window labels it.
  WindowTags a{0, BioSequence(512, Tag::Outside())};
  WindowTags b{256, BioSequence(512, Tag::Outside())};
  a.tags[300] = Tag::Begin(EntityClass::kPerson);
  b.tags[300 - 256] = Tag::Begin(EntityClass::kLocation);
  // Word 600 only exists in the second window.
  b.tags[600 - 256] = Tag::Begin(EntityClass::kValue);
  const std::vector<WindowTags> both = {a, b};
  const BioSequence merged = MergeWindows(both, 768);
  CHECK(merged[300] == Tag::Begin(EntityClass::kPerson));
  CHECK(merged[600] == Tag::Begin(EntityClass::kValue));
  // Word 450: 61 in the first, 194 in the second.
  CHECK(merged.size() == 768);

  const std::vector<WindowTags> single = {{0, Tags({"B-PER", "I-PER", "O"})}};
  CHECK(MergeWindows(single, 3) == Tags({"B-PER", "I-PER", "O"}));

  const std::vector<WindowTags> gap = {{0, BioSequence(4)}, {6, BioSequence(4)}};
  CHECK_THROWS_AS(MergeWindows(gap, 10), Error);

  // Output is repaired even when a window boundary splits an entity.
  const std::vector<WindowTags> split = {{0, Tags({"O", "O", "O", "O"})},
                                         {2, Tags({"I-PER", "I-PER", "I-PER", "O"})}};
  CHECK(tasks::IsValidBio(MergeWindows(split, 6)));
}

TEST_CASE("consistent windows merge to the document") {
  Xoshiro256 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.Below(60);
    const BioSequence doc = RandomBio(rng, n);
    const std::size_t size = 2 + rng.Below(12);
    const std::size_t stride = 1 + rng.Below(size - 1);
    std::vector<WindowTags> windows;
    for (std::size_t off : tasks::SlidingWindowOffsets(n, size, stride)) {
      const std::size_t end = std::min(n, off + size);
      windows.push_back({off, BioSequence(doc.begin() + off, doc.begin() + end)});
    }
    const BioSequence merged = MergeWindows(windows, n);
    CHECK(merged == doc);
  }
}

TEST_CASE("entity extraction equals brute force on all short sequences") {
  const std::vector<Tag> alphabet = {Tag::Outside(), Tag::Begin(EntityClass::kPerson),
                                     Tag::Inside(EntityClass::kPerson), Tag::Begin(EntityClass::kDate),
                                     Tag::Inside(EntityClass::kDate)};
  std::size_t total = 0;
  for (std::size_t n = 0; n <= 6; ++n) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) count *= alphabet.size();
    for (std::size_t code = 0; code < count; ++code) {
      BioSequence tags;
      for (std::size_t i = 0, c = code; i < n; ++i, c /= alphabet.size()) tags.push_back(alphabet[c % alphabet.size()]);
      if (!tasks::IsValidBio(tags)) continue;
      CHECK(ExtractEntities(tags) == oracle::BruteForceSpans(tags));
      ++total;
    }
  }
  CHECK(total > 1000);
  CHECK(ExtractEntities(Tags({"B-PER", "I-PER", "O"})) ==
        std::vector<EntitySpan>{{0, 1, EntityClass::kPerson}});
  CHECK(ExtractEntities(Tags({"O", "O"})).empty());
}

TEST_CASE("entity scoring") {
  const std::vector<EntitySpan> two = {{0, 0, EntityClass::kPerson}, {3, 4, EntityClass::kLocation}};
  NerReport r = EntityPrf(two, two);
  CHECK(r.micro.precision == 1.0);
  CHECK(r.micro.recall == 1.0);
  CHECK(r.micro.f1 == 1.0);
  r = EntityPrf(two, std::vector<EntitySpan>{two[0]});
  CHECK(r.micro.precision == 1.0);
  CHECK(r.micro.recall == 0.5);
  CHECK(r.micro.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("entity scoring equals a brute-force set scorer") {
  Xoshiro256 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    auto spans = [&]() {
      std::set<EntitySpan> s;
      for (std::size_t i = 0, n = rng.Below(12); i < n; ++i) {
        const std::size_t a = rng.Below(15);
        s.insert({a, a + rng.Below(3), tasks::kEntityClasses[rng.Below(5)]});
      }
      return std::vector<EntitySpan>(s.begin(), s.end());
    };
    const auto gold = spans(), pred = spans();
    const NerReport r = EntityPrf(gold, pred);
    std::size_t tg = 0, tp = 0, tc = 0;
    std::vector<double> class_f1;
    bool all_have_gold = true;
    for (std::size_t k = 0; k < tasks::kNumEntityClasses; ++k) {
      const auto cls = tasks::kEntityClasses[k];
      std::size_t g = 0, p = 0, c = 0;
      for (const auto& s : gold) g += s.cls == cls;
      for (const auto& s : pred) {
        if (s.cls != cls) continue;
        ++p;
        for (const auto& t : gold) c += t == s;
      }
      const double prec = p ? static_cast<double>(c) / p : 0.0;
      const double rec = g ? static_cast<double>(c) / g : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      CHECK(r.per_class[k].gold == g);
      CHECK(r.per_class[k].predicted == p);
      CHECK(r.per_class[k].correct == c);
      CHECK(r.per_class[k].precision == prec);
      CHECK(r.per_class[k].recall == rec);
      CHECK(r.per_class[k].f1 == f1);
      tg += g, tp += p, tc += c;
      class_f1.push_back(f1);
      all_have_gold = all_have_gold && g > 0;
    }
    CHECK(r.micro.gold == tg);
    CHECK(r.micro.predicted == tp);
    CHECK(r.micro.correct == tc);
    if (all_have_gold) {
      CHECK(r.micro.f1 >= *std::min_element(class_f1.begin(), class_f1.end()) - 1e-12);
      CHECK(r.micro.f1 <= *std::max_element(class_f1.begin(), class_f1.end()) + 1e-12);
    }
    // Swapping gold and prediction exchanges precision and recall.
    const NerReport s = EntityPrf(pred, gold);
    CHECK(s.micro.precision == r.micro.recall);
    CHECK(s.micro.recall == r.micro.precision);
  }
}

TEST_CASE("report writers") {
  const std::vector<EntitySpan> gold = {{0, 0, EntityClass::kPerson}, {3, 4, EntityClass::kLocation}};
  const NerReport r = EntityPrf(gold, gold);
  std::ostringstream kv, table, conll;
  WriteReport(r, kv);
  CHECK(kv.str().find("micro.f1=1.000000") != std::string::npos);
  WriteTable(r, table);
  CHECK(table.str().find("Person\t100.0\t100.0\t100.0") != std::string::npos);
  CHECK(table.str().find("Date") != std::string::npos);
  CHECK(table.str().find("Overall") != std::string::npos);
  const std::vector<std::string> words = {"John", "lives"};
  WriteConllPredictions(words, Tags({"B-PER", "O"}), Tags({"B-PER", "B-LOC"}), conll);
  CHECK(conll.str() == "John\tB-PER\tB-PER\nlives\tO\tB-LOC\n\n");
  CHECK(Combine(r, r).micro.gold == 4);
}

}  // namespace
}  // namespace dt5::ner
