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
#include "dt5/tasks.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>
#include <sstream>

#include "dt5/corpus.h"
#include "dt5/error.h"
#include "dt5/utf8.h"

namespace dt5::tasks {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void StripCr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Base letters for U+00C0..U+00FF and U+0100..U+017F; '.' keeps the letter.
constexpr std::string_view kLatin1Base =
    "AAAAAA.CEEEEIIIIDNOOOOO.OUUUUY.."
    "aaaaaa.ceeeeiiiidnooooo.ouuuuy.y";
constexpr std::string_view kLatinExtABase =
    "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIi..JjKk.LlLlLlLlLl"
    "NnNnNn...OoOoOo..RrRrRrSsSsSsSsTtTtTtUuUuUuUuUuUuWwYyYZzZzZz.";
static_assert(kLatin1Base.size() == 64);
static_assert(kLatinExtABase.size() == 128);

struct LabelRow {
  EntityClass cls;
  const char* code;
  const char* name;
  std::string english;
  std::string portuguese;
};

const std::array<LabelRow, 6>& LabelTable() {
  static const std::array<LabelRow, 6> table = {{
      {EntityClass::kPerson, "PER", "Person", "Person", "Pessoa"},
      {EntityClass::kOrganization, "ORG", "Organization", "Organization", "Organização"},
      {EntityClass::kLocation, "LOC", "Location", "Local", "Local"},
      {EntityClass::kValue, "VAL", "Value", "Value", "Valor"},
      {EntityClass::kDate, "DATE", "Date", "Date", "Data"},
      {EntityClass::kOther, "O", "Other", "Other", "Outro"},
  }};
  return table;
}

const LabelRow& RowOf(EntityClass cls) {
  return LabelTable()[static_cast<std::size_t>(cls)];
}

}  // namespace

// ---- sentence pairs --------------------------------------------------------

const char* EntailmentName(Entailment e) {
  return e == Entailment::kEntail ? "entail" : "none";
}

Entailment ParseEntailment(std::string_view text) {
  const std::string l = Lower(text);
  if (l == "entail" || l == "entailment") return Entailment::kEntail;
  if (l == "none") return Entailment::kNone;
  ThrowData("unknown entailment label: " + std::string(text));
}

std::vector<SentencePair> ReadPairsTsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) ThrowData("pair file is empty (header row required)");
  StripCr(line);
  const auto header = SplitTabs(line);
  if (header.size() != 5 || header[0] != "id") {
    ThrowData("pair file header must be id, sentence1, sentence2, similarity, entailment");
  }
  std::vector<SentencePair> pairs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    StripCr(line);
    if (line.empty()) continue;
    const auto cells = SplitTabs(line);
    if (cells.size() != 5) {
      ThrowData("line " + std::to_string(line_no) + ": expected 5 tab-separated columns");
    }
    SentencePair p;
    p.id = cells[0];
    p.sentence1 = cells[1];
    p.sentence2 = cells[2];
    if (!cells[3].empty()) {
      double v = 0.0;
      const auto r = std::from_chars(cells[3].data(), cells[3].data() + cells[3].size(), v);
      if (r.ec != std::errc() || r.ptr != cells[3].data() + cells[3].size() || v < 1.0 || v > 5.0) {
        ThrowData("line " + std::to_string(line_no) + ": similarity must be a number in [1, 5]");
      }
      p.similarity = v;
    }
    if (!cells[4].empty()) p.entailment = ParseEntailment(cells[4]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void WritePairsTsv(std::ostream& out, std::span<const SentencePair> pairs) {
  out << "id\tsentence1\tsentence2\tsimilarity\tentailment\n";
  for (const auto& p : pairs) {
    out << p.id << '\t' << p.sentence1 << '\t' << p.sentence2 << '\t';
    if (p.similarity) {
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, *p.similarity);
      out.write(buf, r.ptr - buf);
    }
    out << '\t';
    if (p.entailment) out << EntailmentName(*p.entailment);
    out << '\n';
  }
}

std::vector<std::string> AssinSegments(std::string_view s1, std::string_view s2) {
  return {"ASSIN sentence1: " + std::string(s1), "sentence2: " + std::string(s2)};
}

TokenIds EncodeSegments(const unigram::Vocab& vocab,
                        std::span<const std::string> segments) {
  TokenIds ids;
  for (const auto& seg : segments) {
    const TokenIds part = unigram::Encode(vocab, seg);
    ids.insert(ids.end(), part.begin(), part.end());
    ids.push_back(unigram::kEosId);
  }
  return ids;
}

TokenIds FormatAssinPair(const unigram::Vocab& vocab, std::string_view s1,
                         std::string_view s2) {
  return EncodeSegments(vocab, AssinSegments(s1, s2));
}

std::string RenderScore(double score) {
  if (!(score >= 1.0 && score <= 5.0)) ThrowUsage("similarity score outside [1, 5]");
  char buf[16];
  const auto r = std::to_chars(buf, buf + sizeof buf, score, std::chars_format::fixed, 1);
  return std::string(buf, r.ptr);
}

TokenIds MakeSimilarityTarget(double score, const unigram::Vocab& vocab) {
  TokenIds ids = unigram::Encode(vocab, RenderScore(score));
  ids.push_back(unigram::kEosId);
  return ids;
}

ScoreParse ParseScoreText(std::string_view text) {
  static const std::regex number(R"([0-9]+([.,][0-9]+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, number)) return {3.0, true};
  std::string s = m.str();
  std::replace(s.begin(), s.end(), ',', '.');
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return {std::clamp(v, 1.0, 5.0), false};
}

ScoreParse ParseScoreString(std::span<const TokenId> generated,
                            const unigram::Vocab& vocab) {
  const auto head = generated.first(std::min(generated.size(), kScoreTokens));
  return ParseScoreText(unigram::Decode(vocab, head));
}

// ---- NER -------------------------------------------------------------------

LabelLanguage ParseLabelLanguage(std::string_view name) {
  const std::string l = Lower(name);
  if (l == "portuguese" || l == "pt") return LabelLanguage::kPortuguese;
  if (l == "english" || l == "en") return LabelLanguage::kEnglish;
  ThrowUsage("unknown label language: " + std::string(name));
}

const std::string& ClassLabel(EntityClass cls, LabelLanguage lang) {
  const LabelRow& row = RowOf(cls);
  return lang == LabelLanguage::kEnglish ? row.english : row.portuguese;
}

std::optional<EntityClass> ParseClassLabel(std::string_view label) {
  const std::string l = Lower(StripAccents(label));
  for (const LabelRow& row : LabelTable()) {
    if (l == Lower(StripAccents(row.english)) || l == Lower(StripAccents(row.portuguese)) ||
        l == Lower(row.name)) {
      return row.cls;
    }
  }
  if (l == "tempo" || l == "time") return EntityClass::kDate;
  if (l == "localizacao" || l == "lugar") return EntityClass::kLocation;
  return std::nullopt;
}

const char* TagCode(EntityClass cls) { return RowOf(cls).code; }
const char* ClassName(EntityClass cls) { return RowOf(cls).name; }

std::string TagString(const Tag& tag) {
  if (tag.prefix == 'O') return "O";
  return std::string(1, tag.prefix) + "-" + TagCode(tag.cls);
}

Tag ParseTag(std::string_view text) {
  if (text == "O") return Tag::Outside();
  if (text.size() < 3 || (text[0] != 'B' && text[0] != 'I') || text[1] != '-') {
    ThrowData("bad BIO tag: " + std::string(text));
  }
  const std::string code(text.substr(2));
  static const std::array<std::pair<const char*, EntityClass>, 10> codes = {{
      {"PER", EntityClass::kPerson},       {"PESSOA", EntityClass::kPerson},
      {"ORG", EntityClass::kOrganization}, {"ORGANIZACAO", EntityClass::kOrganization},
      {"LOC", EntityClass::kLocation},     {"LOCAL", EntityClass::kLocation},
      {"VAL", EntityClass::kValue},        {"VALOR", EntityClass::kValue},
      {"DATE", EntityClass::kDate},        {"TEMPO", EntityClass::kDate},
  }};
  for (const auto& [name, cls] : codes) {
    if (code == name) return {text[0], cls};
  }
  ThrowData("unknown entity class in tag: " + std::string(text));
}

bool IsValidBio(std::span<const Tag> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag& t = tags[i];
    if (t.prefix == 'O') {
      if (t.cls != EntityClass::kOther) return false;
      continue;
    }
    if (t.cls == EntityClass::kOther) return false;
    if (t.prefix == 'I') {
      if (i == 0 || tags[i - 1].prefix == 'O' || tags[i - 1].cls != t.cls) return false;
    } else if (t.prefix != 'B') {
      return false;
    }
  }
  return true;
}

std::vector<NerDocument> ReadConll(std::istream& in) {
  std::vector<NerDocument> docs;
  NerDocument cur;
  auto flush = [&] {
    if (cur.words.empty()) return;
    if (!IsValidBio(cur.tags)) ThrowData("invalid BIO sequence in document " + cur.doc_id);
    docs.push_back(std::move(cur));
    cur = NerDocument();
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    StripCr(line);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    const auto fields = corpus::SplitWords(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields.size() != 2) {
      ThrowData("line " + std::to_string(line_no) + ": expected word and tag");
    }
    if (cur.words.empty()) cur.doc_id = "doc" + std::to_string(docs.size());
    cur.words.push_back(fields[0]);
    cur.tags.push_back(ParseTag(fields[1]));
  }
  flush();
  return docs;
}

std::string FormatNerInputText(std::span<const std::string> words) {
  std::string out = "Recognize Entities: ";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

TokenIds FormatNerInput(const unigram::Vocab& vocab,
                        std::span<const std::string> words) {
  TokenIds ids = unigram::Encode(vocab, FormatNerInputText(words));
  ids.push_back(unigram::kEosId);
  return ids;
}

std::string BuildNerTarget(std::span<const std::string> words,
                           std::span<const Tag> tags, LabelLanguage lang) {
  if (words.size() != tags.size()) ThrowData("words and tags differ in length");
  if (!IsValidBio(tags)) ThrowData("invalid BIO sequence");
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
    const bool last = i + 1 == words.size();
    bool closes = last;
    if (!last) {
      const Tag& next = tags[i + 1];
      if (tags[i].prefix == 'O') {
        closes = next.prefix != 'O';
      } else {
        closes = next.prefix != 'I';
      }
    }
    if (closes) out += " [" + ClassLabel(tags[i].cls, lang) + "]";
  }
  return out;
}

std::string StripAccents(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : utf8::Decode(text)) {
    if (c >= 0x0300 && c <= 0x036F) continue;  // combining marks
    char base = '.';
    if (c >= 0x00C0 && c <= 0x00FF) base = kLatin1Base[c - 0x00C0];
    if (c >= 0x0100 && c <= 0x017F) base = kLatinExtABase[c - 0x0100];
    if (base != '.') {
      out += base;
    } else {
      utf8::Append(c, out);
    }
  }
  return out;
}

std::vector<std::size_t> SlidingWindowOffsets(std::size_t length, std::size_t size,
                                              std::size_t stride) {
  if (!(size > stride && stride > 0)) ThrowUsage("window size must exceed stride > 0");
  if (length <= size) return {0};
  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + size < length; off += stride) offsets.push_back(off);
  if (offsets.back() + size < length) offsets.push_back(length - size);
  return offsets;
}

std::vector<WindowedExample> SlidingWindows(const std::string& parent,
                                            std::span<const TokenId> ids,
                                            std::size_t size, std::size_t stride) {
  std::vector<WindowedExample> out;
  for (std::size_t off : SlidingWindowOffsets(ids.size(), size, stride)) {
    const std::size_t len = std::min(size, ids.size() - off);
    out.push_back({parent, off, TokenIds(ids.begin() + off, ids.begin() + off + len)});
  }
  return out;
}

}  // namespace dt5::tasks
