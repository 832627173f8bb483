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
#include "dt5/ner.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>

#include "dt5/corpus.h"
#include "dt5/error.h"

namespace dt5::ner {

ParseResult ParseTaggedOutput(std::string_view text) {
  ParseResult result;
  std::vector<std::string> pending;
  std::size_t pos = 0;
  auto take_words = [&](std::string_view chunk) {
    for (auto& w : corpus::SplitWords(chunk)) pending.push_back(std::move(w));
  };
  while (pos < text.size()) {
    const std::size_t open = text.find('[', pos);
    if (open == std::string_view::npos) {
      take_words(text.substr(pos));
      break;
    }
    const std::size_t close = text.find(']', open + 1);
    if (close == std::string_view::npos) {
      take_words(text.substr(pos));
      break;
    }
    take_words(text.substr(pos, open - pos));
    const std::string_view label = text.substr(open + 1, close - open - 1);
    auto cls = tasks::ParseClassLabel(label);
    if (!cls) {
      result.unknown_label = true;
      cls = EntityClass::kOther;
    }
    if (pending.empty()) {
      result.empty_segment = true;
    } else {
      result.segments.push_back({std::move(pending), *cls});
      pending.clear();
    }
    pos = close + 1;
  }
  if (!pending.empty()) {
    result.dangling = true;
    result.segments.push_back({std::move(pending), EntityClass::kOther});
  }
  return result;
}

AlignResult ToBio(std::span<const TaggedSegment> segments,
                  std::span<const std::string> input_words) {
  AlignResult out;
  out.tags.assign(input_words.size(), Tag::Outside());
  std::size_t i = 0;
  for (const TaggedSegment& seg : segments) {
    for (std::size_t k = 0; k < seg.words.size(); ++k) {
      if (i >= input_words.size()) {
        out.overflow = true;
        return out;
      }
      if (seg.cls != EntityClass::kOther) {
        out.tags[i] = k == 0 ? Tag::Begin(seg.cls) : Tag::Inside(seg.cls);
      }
      ++i;
    }
  }
  return out;
}

BioSequence RepairBio(BioSequence tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag& t = tags[i];
    if (t.prefix == 'O' || t.cls == EntityClass::kOther) {
      t = Tag::Outside();
      continue;
    }
    if (t.prefix == 'I' &&
        (i == 0 || tags[i - 1].prefix == 'O' || tags[i - 1].cls != t.cls)) {
      t.prefix = 'B';
    }
  }
  return tags;
}

BioSequence MergeWindows(std::span<const WindowTags> windows, std::size_t doc_len) {
  BioSequence merged(doc_len, Tag::Outside());
  for (std::size_t pos = 0; pos < doc_len; ++pos) {
    const Tag* best = nullptr;
    std::size_t best_dist = 0;
    for (const WindowTags& w : windows) {
      if (pos < w.offset || pos >= w.offset + w.tags.size()) continue;
      const std::size_t left = pos - w.offset;
      const std::size_t right = w.offset + w.tags.size() - 1 - pos;
      const std::size_t dist = std::min(left, right);
      if (!best || dist > best_dist) {
        best = &w.tags[left];
        best_dist = dist;
      }
    }
    if (!best) ThrowData("windows do not cover document");
    merged[pos] = *best;
  }
  return RepairBio(std::move(merged));
}

std::vector<EntitySpan> ExtractEntities(std::span<const Tag> tags) {
  std::vector<EntitySpan> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    const Tag& t = tags[i];
    // A stray I-X (unrepaired input) opens a span like B-X would.
    if (t.prefix == 'O' || t.cls == EntityClass::kOther) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j].prefix == 'I' && tags[j].cls == t.cls) ++j;
    spans.push_back({i, j - 1, t.cls});
    i = j;
  }
  return spans;
}

Prf MakePrf(std::size_t gold, std::size_t predicted, std::size_t correct) {
  Prf p{gold, predicted, correct, 0.0, 0.0, 0.0};
  if (predicted) p.precision = static_cast<double>(correct) / static_cast<double>(predicted);
  if (gold) p.recall = static_cast<double>(correct) / static_cast<double>(gold);
  if (p.precision + p.recall > 0.0) {
    p.f1 = 2.0 * p.precision * p.recall / (p.precision + p.recall);
  }
  return p;
}

NerReport EntityPrf(std::span<const EntitySpan> gold,
                    std::span<const EntitySpan> pred) {
  std::array<std::size_t, tasks::kNumEntityClasses> g{}, p{}, c{};
  const std::set<EntitySpan> gold_set(gold.begin(), gold.end());
  for (const auto& s : gold) {
    if (s.cls != EntityClass::kOther) ++g[static_cast<std::size_t>(s.cls)];
  }
  for (const auto& s : std::set<EntitySpan>(pred.begin(), pred.end())) {
    if (s.cls == EntityClass::kOther) continue;
    const auto k = static_cast<std::size_t>(s.cls);
    ++p[k];
    if (gold_set.count(s)) ++c[k];
  }
  NerReport r;
  std::size_t tg = 0, tp = 0, tc = 0;
  for (std::size_t k = 0; k < tasks::kNumEntityClasses; ++k) {
    r.per_class[k] = MakePrf(g[k], p[k], c[k]);
    tg += g[k];
    tp += p[k];
    tc += c[k];
  }
  r.micro = MakePrf(tg, tp, tc);
  return r;
}

NerReport Combine(const NerReport& a, const NerReport& b) {
  NerReport r;
  std::size_t tg = 0, tp = 0, tc = 0;
  for (std::size_t k = 0; k < tasks::kNumEntityClasses; ++k) {
    const Prf& x = a.per_class[k];
    const Prf& y = b.per_class[k];
    r.per_class[k] = MakePrf(x.gold + y.gold, x.predicted + y.predicted,
                             x.correct + y.correct);
    tg += x.gold + y.gold;
    tp += x.predicted + y.predicted;
    tc += x.correct + y.correct;
  }
  r.micro = MakePrf(tg, tp, tc);
  return r;
}

void WriteReport(const NerReport& report, std::ostream& out) {
  char buf[256];
  auto line = [&](const std::string& key, const Prf& p) {
    std::snprintf(buf, sizeof buf,
                  "%s.gold=%zu\n%s.predicted=%zu\n%s.correct=%zu\n"
                  "%s.precision=%.6f\n%s.recall=%.6f\n%s.f1=%.6f\n",
                  key.c_str(), p.gold, key.c_str(), p.predicted, key.c_str(),
                  p.correct, key.c_str(), p.precision, key.c_str(), p.recall,
                  key.c_str(), p.f1);
    out << buf;
  };
  for (std::size_t k = 0; k < tasks::kNumEntityClasses; ++k) {
    line(tasks::ClassName(tasks::kEntityClasses[k]), report.per_class[k]);
  }
  line("micro", report.micro);
}

void WriteTable(const NerReport& report, std::ostream& out) {
  char buf[128];
  out << "class\tprecision\trecall\tf1\n";
  auto row = [&](const char* name, const Prf& p) {
    std::snprintf(buf, sizeof buf, "%s\t%.1f\t%.1f\t%.1f\n", name,
                  100.0 * p.precision, 100.0 * p.recall, 100.0 * p.f1);
    out << buf;
  };
  for (std::size_t k = 0; k < tasks::kNumEntityClasses; ++k) {
    row(tasks::ClassName(tasks::kEntityClasses[k]), report.per_class[k]);
  }
  row("Overall", report.micro);
}

void WriteConllPredictions(std::span<const std::string> words,
                           std::span<const Tag> gold, std::span<const Tag> pred,
                           std::ostream& out) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    out << words[i] << '\t' << tasks::TagString(gold[i]) << '\t'
        << tasks::TagString(pred[i]) << '\n';
  }
  out << '\n';
}

}  // namespace dt5::ner
