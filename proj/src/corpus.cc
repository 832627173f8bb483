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
#include "dt5/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dt5/error.h"
#include "dt5/utf8.h"

namespace dt5::corpus {

namespace {

std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> BuildMojibakeTable() {
  static constexpr std::array<char32_t, 24> kLetters = {
      U'ã', U'õ', U'á', U'é', U'í', U'ó', U'ú', U'â', U'ê', U'ô', U'à', U'ç',
      U'Ã', U'Õ', U'Á', U'É', U'Í', U'Ó', U'Ú', U'Â', U'Ê', U'Ô', U'À', U'Ç'};
  std::vector<std::pair<std::string, std::string>> table;
  for (char32_t letter : kLetters) {
    std::string good;
    utf8::Append(letter, good);
    // Each UTF-8 byte reinterpreted as a Latin-1 code point.
    std::string damaged;
    for (unsigned char byte : good) utf8::Append(byte, damaged);
    table.emplace_back(std::move(damaged), std::move(good));
  }
  return table;
}

bool IsHorizontalSpace(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\v' || c == U'\f' || c == 0xA0;
}

// One left-to-right pass over the table. Returns true if anything changed.
bool RepairOnce(std::string& s) {
  const auto& table = MojibakeTable();
  std::string out;
  out.reserve(s.size());
  bool changed = false;
  std::size_t i = 0;
  while (i < s.size()) {
    bool hit = false;
    for (const auto& [bad, good] : table) {
      if (s.compare(i, bad.size(), bad) == 0) {
        out += good;
        i += bad.size();
        hit = changed = true;
        break;
      }
    }
    if (!hit) out.push_back(s[i++]);
  }
  s.swap(out);
  return changed;
}

const std::vector<std::u32string>& Abbreviations() {
  static const std::vector<std::u32string> kList = {
      U"Sr.",  U"Sra.", U"Srta.", U"Dr.",  U"Dra.",  U"Prof.", U"Profa.",
      U"etc.", U"e.g.", U"i.e.",  U"Exmo.", U"Exma.", U"Av.",  U"Jr.",
      U"Sto.", U"Sta.", U"pág.",  U"p.",   U"n.",    U"nº.",  U"vs."};
  return kList;
}

bool IsTerminal(char32_t c) {
  return c == U'.' || c == U'!' || c == U'?' || c == U'…';
}

bool IsOpeningQuote(char32_t c) {
  return c == U'"' || c == U'\'' || c == U'“' || c == U'«' || c == U'‘' ||
         c == U'(' || c == U'\u2014';
}

// Word ending at text[end-1] (exclusive end), scanning back to whitespace.
std::u32string WordEndingAt(const std::u32string& text, std::size_t end) {
  std::size_t begin = end;
  while (begin > 0 && !utf8::IsSpace(text[begin - 1])) --begin;
  return text.substr(begin, end - begin);
}

void SplitLine(const std::u32string& line, std::vector<Sentence>& out) {
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    Sentence s;
    s.words = SplitWords(utf8::Encode(line.substr(start, end - start)));
    if (!s.words.empty()) out.push_back(std::move(s));
    start = end;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (!IsTerminal(line[i])) continue;
    // Extend over clustered punctuation and closing quotes/brackets.
    std::size_t end = i + 1;
    while (end < line.size() &&
           (IsTerminal(line[end]) || line[end] == U'"' || line[end] == U'”' ||
            line[end] == U'»' || line[end] == U')' || line[end] == U'\'')) {
      ++end;
    }
    if (end >= line.size() || !utf8::IsSpace(line[end])) continue;
    std::size_t next = end;
    while (next < line.size() && utf8::IsSpace(line[next])) ++next;
    if (next >= line.size()) continue;
    if (!utf8::IsUpper(line[next]) && !IsOpeningQuote(line[next])) continue;
    if (line[i] == U'.') {
      const std::u32string word = WordEndingAt(line, i + 1);
      const auto& abbrev = Abbreviations();
      if (std::find(abbrev.begin(), abbrev.end(), word) != abbrev.end()) {
        continue;
      }
    }
    emit(end);
    i = end - 1;
  }
  emit(line.size());
}

}  // namespace

std::string Sentence::Text() const { return JoinWords(words); }

std::string PackedDocument::Text() const {
  std::string out;
  for (const auto& s : sentences) {
    for (const auto& w : s.words) {
      if (!out.empty()) out.push_back(' ');
      out += w;
    }
  }
  return out;
}

const std::vector<std::pair<std::string, std::string>>& MojibakeTable() {
  static const auto table = BuildMojibakeTable();
  return table;
}

std::string FixEncoding(std::string_view text) {
  // Re-encoding replaces malformed bytes with U+FFFD.
  std::string s = utf8::Encode(utf8::Decode(text));
  // Iterate to a fixed point: a repair can expose a new damaged pair
  // (e.g. "Ã" followed by a stray continuation code point).
  while (RepairOnce(s)) {
  }
  const std::u32string cps = utf8::Decode(s);
  std::u32string out;
  out.reserve(cps.size());
  bool in_space = false;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t c = cps[i];
    if (c == 0) continue;
    if (c == U'\r') {
      if (i + 1 < cps.size() && cps[i + 1] == U'\n') continue;
      c = U'\n';
    }
    if (IsHorizontalSpace(c)) {
      if (!in_space) out.push_back(U' ');
      in_space = true;
      continue;
    }
    in_space = false;
    out.push_back(c);
  }
  return utf8::Encode(out);
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  const std::u32string cps = utf8::Decode(text);
  std::u32string current;
  for (char32_t c : cps) {
    if (utf8::IsSpace(c)) {
      if (!current.empty()) words.push_back(utf8::Encode(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(utf8::Encode(current));
  return words;
}

std::vector<Sentence> SplitSentences(std::string_view text) {
  std::vector<Sentence> out;
  const std::u32string cps = utf8::Decode(text);
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= cps.size(); ++i) {
    if (i == cps.size() || cps[i] == U'\n' || cps[i] == U'\r') {
      SplitLine(cps.substr(begin, i - begin), out);
      begin = i + 1;
    }
  }
  return out;
}

std::vector<PackedDocument> PackSentences(const std::vector<Sentence>& sentences,
                                          std::size_t max_words) {
  if (max_words < 1) ThrowUsage("max_words must be at least 1");
  std::vector<PackedDocument> docs;
  PackedDocument current;
  auto flush = [&] {
    if (!current.sentences.empty()) docs.push_back(std::move(current));
    current = PackedDocument{};
  };
  for (const Sentence& s : sentences) {
    if (s.words.empty()) continue;
    if (s.word_count() > max_words) {
      flush();
      PackedDocument alone;
      Sentence cut;
      cut.words.assign(s.words.begin(), s.words.begin() + max_words);
      alone.sentences.push_back(std::move(cut));
      alone.total_words = max_words;
      docs.push_back(std::move(alone));
      continue;
    }
    if (current.total_words + s.word_count() > max_words) flush();
    current.sentences.push_back(s);
    current.total_words += s.word_count();
  }
  flush();
  return docs;
}

CorpusStats ComputeStats(const std::vector<std::size_t>& word_counts) {
  if (word_counts.empty()) ThrowData("empty corpus");
  // Exact integer sums; the reduction is associative across shards.
  unsigned __int128 sum = 0;
  unsigned __int128 sum_sq = 0;
  for (std::size_t c : word_counts) {
    sum += c;
    sum_sq += static_cast<unsigned __int128>(c) * c;
  }
  CorpusStats stats;
  stats.n_documents = word_counts.size();
  stats.n_words = static_cast<std::uint64_t>(sum);
  const long double n = static_cast<long double>(word_counts.size());
  const long double mean = static_cast<long double>(sum) / n;
  // n * sum_sq - sum^2 is exact in 128-bit integers.
  const unsigned __int128 num = static_cast<unsigned __int128>(word_counts.size()) * sum_sq - sum * sum;
  const long double var = static_cast<long double>(num) / (n * n);
  stats.mean_words = static_cast<double>(mean);
  stats.std_words = static_cast<double>(std::sqrt(var));
  return stats;
}

CorpusStats ComputeStats(const std::vector<PackedDocument>& docs) {
  std::vector<std::size_t> counts;
  counts.reserve(docs.size());
  for (const auto& d : docs) counts.push_back(d.total_words);
  return ComputeStats(counts);
}

void WriteStats(const CorpusStats& stats, std::ostream& out) {
  char buf[64];
  out << "n_documents=" << stats.n_documents << '\n';
  out << "n_words=" << stats.n_words << '\n';
  std::snprintf(buf, sizeof(buf), "%.6f", stats.mean_words);
  out << "mean_words=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.6f", stats.std_words);
  out << "std_words=" << buf << '\n';
}

void WritePacked(const std::vector<PackedDocument>& docs, std::ostream& out) {
  for (const auto& d : docs) out << d.Text() << '\n';
}

}  // namespace dt5::corpus
