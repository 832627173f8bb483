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
#include "dt5/unigram.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "dt5/error.h"
#include "dt5/utf8.h"

namespace dt5::unigram {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::fabs(a - b)));
}

std::string EscapePiece(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string UnescapePiece(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

bool IsReservedSpelling(std::string_view s) {
  return s == kPadPiece || s == kEosPiece || s == kUnkPiece || s == kMaskPiece;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  pieces_ = {{std::string(kPadPiece), 0.0},
             {std::string(kEosPiece), 0.0},
             {std::string(kUnkPiece), 0.0},
             {std::string(kMaskPiece), 0.0}};
  Rebuild();
}

Vocab Vocab::FromPieces(std::vector<Piece> pieces) {
  Vocab v;
  v.pieces_.reserve(kNumReserved + pieces.size());
  for (auto& p : pieces) {
    if (p.text.empty()) ThrowData("empty vocabulary piece");
    if (IsReservedSpelling(p.text)) {
      ThrowData("piece spelled like a reserved token: " + p.text);
    }
    if (!std::isfinite(p.log_prob)) {
      ThrowData("non-finite log-probability for piece " + p.text);
    }
    v.pieces_.push_back(std::move(p));
  }
  v.Rebuild();
  return v;
}

void Vocab::Rebuild() {
  index_.clear();
  chars_.assign(pieces_.size(), std::u32string());
  trie_.assign(1, TrieNode{});
  min_log_prob_ = 0.0;
  bool first = true;
  for (std::size_t id = 0; id < pieces_.size(); ++id) {
    const Piece& p = pieces_[id];
    if (!index_.emplace(p.text, static_cast<TokenId>(id)).second) {
      ThrowData("duplicate vocabulary piece: " + p.text);
    }
    if (id < kNumReserved) continue;
    chars_[id] = utf8::Decode(p.text);
    if (first || p.log_prob < min_log_prob_) min_log_prob_ = p.log_prob;
    first = false;
    std::uint32_t node = 0;
    for (char32_t c : chars_[id]) {
      auto& kids = trie_[node].children;
      auto it = std::lower_bound(
          kids.begin(), kids.end(), c,
          [](const auto& kv, char32_t key) { return kv.first < key; });
      if (it != kids.end() && it->first == c) {
        node = it->second;
      } else {
        const auto next = static_cast<std::uint32_t>(trie_.size());
        kids.insert(it, {c, next});
        trie_.push_back(TrieNode{});
        node = next;
      }
    }
    trie_[node].id = static_cast<TokenId>(id);
  }
}

std::uint32_t Vocab::Child(std::uint32_t node, char32_t c) const {
  const auto& kids = trie_[node].children;
  auto it = std::lower_bound(
      kids.begin(), kids.end(), c,
      [](const auto& kv, char32_t key) { return kv.first < key; });
  if (it == kids.end() || it->first != c) return kNoNode;
  return it->second;
}

const Piece& Vocab::piece(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) {
    ThrowData("token id out of range: " + std::to_string(id));
  }
  return pieces_[id];
}

std::optional<TokenId> Vocab::Find(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocab::Save(std::ostream& out) const {
  char buf[64];
  for (const Piece& p : pieces_) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.log_prob);
    out << EscapePiece(p.text) << '\t' << buf << '\n';
  }
}

Vocab Vocab::Load(std::istream& in) {
  std::vector<Piece> pieces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      ThrowData("vocabulary line " + std::to_string(line_no) + " has no tab");
    }
    Piece p;
    p.text = UnescapePiece(std::string_view(line).substr(0, tab));
    const std::string num = line.substr(tab + 1);
    char* end = nullptr;
    p.log_prob = std::strtod(num.c_str(), &end);
    if (end == num.c_str() || *end != '\0') {
      ThrowData("bad log-probability on vocabulary line " +
                std::to_string(line_no));
    }
    if (line_no < kNumReserved) {
      static constexpr std::string_view kReserved[] = {kPadPiece, kEosPiece,
                                                       kUnkPiece, kMaskPiece};
      if (p.text != kReserved[line_no]) {
        ThrowData("vocabulary line " + std::to_string(line_no) +
                  " must be the reserved token " +
                  std::string(kReserved[line_no]));
      }
    } else {
      pieces.push_back(std::move(p));
    }
    ++line_no;
  }
  if (line_no < kNumReserved) ThrowData("vocabulary file is truncated");
  return FromPieces(std::move(pieces));
}

void Vocab::SaveFile(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) ThrowData("cannot write " + path);
  Save(out);
}

Vocab Vocab::LoadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read " + path);
  return Load(in);
}

// ---------------------------------------------------------------------------
// Lattice and Viterbi

std::u32string Normalize(std::string_view text) {
  std::u32string out = utf8::Decode(text);
  std::replace(out.begin(), out.end(), U' ', kBoundary);
  return out;
}

Lattice BuildLattice(const Vocab& vocab, std::u32string_view text,
                     TokenId excluded_id) {
  Lattice lattice;
  lattice.text.assign(text);
  lattice.edges.resize(text.size());
  const double unk_score = vocab.min_log_prob() - kUnkPenalty;
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    auto& edges = lattice.edges[pos];
    bool has_single = false;
    vocab.ForEachMatch(text, pos, [&](std::size_t end, TokenId id) {
      if (id == excluded_id) return;
      if (end == pos + 1) has_single = true;
      edges.push_back({static_cast<std::uint32_t>(end), id,
                       vocab.pieces()[id].log_prob});
    });
    if (!has_single) {
      edges.insert(edges.begin(),
                   {static_cast<std::uint32_t>(pos + 1), kUnkId, unk_score});
    }
  }
  return lattice;
}

Segmentation Viterbi(const Lattice& lattice) {
  const std::size_t n = lattice.text.size();
  struct Best {
    double score;
    std::size_t count;
    std::uint32_t end;
    TokenId id;
  };
  std::vector<Best> best(n + 1, Best{kNegInf, 0, 0, -1});
  best[n] = Best{0.0, 0, 0, -1};
  for (std::size_t i = n; i-- > 0;) {
    Best& b = best[i];
    // Edges are ordered by increasing end, so among equal (score, count)
    // the first edge seen has the shortest, i.e. lexicographically
    // smallest, first piece.
    for (const LatticeEdge& e : lattice.edges[i]) {
      const Best& tail = best[e.end];
      if (tail.score == kNegInf) continue;
      const double score = e.log_prob + tail.score;
      const std::size_t count = tail.count + 1;
      if (b.id < 0 || score > b.score || (score == b.score && count < b.count)) {
        b = Best{score, count, e.end, e.id};
      }
    }
  }
  Segmentation seg;
  seg.score = n == 0 ? 0.0 : best[0].score;
  for (std::size_t pos = 0; pos < n;) {
    seg.ids.push_back(best[pos].id);
    pos = best[pos].end;
  }
  return seg;
}

TokenIds Encode(const Vocab& vocab, std::string_view text) {
  if (text.empty()) return {};
  return Viterbi(BuildLattice(vocab, Normalize(text))).ids;
}

std::string Decode(const Vocab& vocab, std::span<const TokenId> ids) {
  std::u32string out;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      ThrowData("token id out of range: " + std::to_string(id));
    }
    switch (id) {
      case kPadId:
      case kEosId:
        break;
      case kUnkId:
        out.push_back(0x2047);
        break;
      case kMaskId:
        out += U"<M>";
        break;
      default:
        out += vocab.chars(id);
    }
  }
  std::replace(out.begin(), out.end(), kBoundary, U' ');
  return utf8::Encode(out);
}

// ---------------------------------------------------------------------------
// Training

TrainingCorpus BuildTrainingCorpus(std::span<const std::string> sentences) {
  std::unordered_map<std::u32string, double> counts;
  for (const std::string& s : sentences) {
    const std::u32string text = Normalize(s);
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == kBoundary) {
        if (i > begin) counts[text.substr(begin, i - begin)] += 1.0;
        begin = i;
      }
    }
  }
  TrainingCorpus corpus;
  corpus.chunks.assign(counts.begin(), counts.end());
  std::sort(corpus.chunks.begin(), corpus.chunks.end());
  std::vector<char32_t> chars;
  for (const auto& [chunk, w] : corpus.chunks) {
    chars.insert(chars.end(), chunk.begin(), chunk.end());
  }
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  corpus.characters = std::move(chars);
  return corpus;
}

Vocab BuildSeedVocab(const TrainingCorpus& corpus, std::size_t seed_size,
                     std::size_t max_piece_chars) {
  if (corpus.chunks.empty()) ThrowData("empty training corpus");
  if (seed_size < corpus.characters.size()) {
    ThrowUsage("seed_size " + std::to_string(seed_size) + " is below the " +
               std::to_string(corpus.characters.size()) +
               " distinct characters of the corpus");
  }
  std::unordered_map<std::u32string, double> freq;
  for (const auto& [chunk, w] : corpus.chunks) {
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const std::size_t max_len = std::min(max_piece_chars, chunk.size() - i);
      for (std::size_t len = 1; len <= max_len; ++len) {
        freq[chunk.substr(i, len)] += w;
      }
    }
  }
  std::vector<std::pair<std::u32string, double>> singles;
  std::vector<std::pair<std::u32string, double>> multis;
  for (auto& kv : freq) {
    (kv.first.size() == 1 ? singles : multis).push_back(kv);
  }
  std::sort(multis.begin(), multis.end(), [](const auto& a, const auto& b) {
    const double sa = a.second * static_cast<double>(a.first.size());
    const double sb = b.second * static_cast<double>(b.first.size());
    if (sa != sb) return sa > sb;
    return a.first < b.first;
  });
  const std::size_t room = seed_size - singles.size();
  if (multis.size() > room) multis.resize(room);

  std::vector<std::pair<std::u32string, double>> chosen = std::move(singles);
  chosen.insert(chosen.end(), multis.begin(), multis.end());
  std::sort(chosen.begin(), chosen.end());
  double total = 0.0;
  for (const auto& kv : chosen) total += kv.second;
  std::vector<Piece> pieces;
  pieces.reserve(chosen.size());
  for (const auto& [text, f] : chosen) {
    pieces.push_back({utf8::Encode(text), std::log(f / total)});
  }
  return Vocab::FromPieces(std::move(pieces));
}

Vocab BuildSeedVocab(std::span<const std::string> sentences,
                     std::size_t seed_size, std::size_t max_piece_chars) {
  return BuildSeedVocab(BuildTrainingCorpus(sentences), seed_size,
                        max_piece_chars);
}

ExpectedCounts ComputeExpectedCounts(const TrainingCorpus& corpus,
                                     const Vocab& vocab) {
  ExpectedCounts result;
  result.counts.assign(vocab.size(), 0.0);
  std::vector<double> alpha;
  std::vector<double> beta;
  for (const auto& [chunk, weight] : corpus.chunks) {
    const Lattice lattice = BuildLattice(vocab, chunk);
    const std::size_t n = chunk.size();
    alpha.assign(n + 1, kNegInf);
    beta.assign(n + 1, kNegInf);
    alpha[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] == kNegInf) continue;
      for (const LatticeEdge& e : lattice.edges[i]) {
        alpha[e.end] = LogAddExp(alpha[e.end], alpha[i] + e.log_prob);
      }
    }
    beta[n] = 0.0;
    for (std::size_t i = n; i-- > 0;) {
      double acc = kNegInf;
      for (const LatticeEdge& e : lattice.edges[i]) {
        acc = LogAddExp(acc, e.log_prob + beta[e.end]);
      }
      beta[i] = acc;
    }
    const double log_z = alpha[n];
    result.log_likelihood += weight * log_z;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] == kNegInf) continue;
      for (const LatticeEdge& e : lattice.edges[i]) {
        const double lp = alpha[i] + e.log_prob + beta[e.end] - log_z;
        result.counts[e.id] += weight * std::exp(lp);
      }
    }
  }
  return result;
}

EmResult EmStep(const TrainingCorpus& corpus, const Vocab& vocab) {
  const ExpectedCounts ec = ComputeExpectedCounts(corpus, vocab);
  double total = 0.0;
  for (std::size_t id = kNumReserved; id < vocab.size(); ++id) {
    total += ec.counts[id];
  }
  std::vector<Piece> pieces(vocab.pieces().begin() + kNumReserved,
                            vocab.pieces().end());
  if (total > 0.0) {
    const double log_total = std::log(total);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      // Underflowed counts are floored so every log-prob stays finite.
      const double c = std::max(ec.counts[kNumReserved + i],
                                std::numeric_limits<double>::min());
      pieces[i].log_prob = std::log(c) - log_total;
    }
  }
  return EmResult{Vocab::FromPieces(std::move(pieces)), ec.log_likelihood};
}

Vocab PruneVocab(const TrainingCorpus& corpus, Vocab vocab,
                 std::size_t target_size, const PruneOptions& options) {
  const std::size_t required = corpus.characters.size() + kNumReserved;
  if (target_size < required) {
    ThrowUsage("target vocabulary size " + std::to_string(target_size) +
               " is below characters + reserved ids (" +
               std::to_string(required) + ")");
  }
  if (!(options.shrink_factor > 0.0 && options.shrink_factor < 1.0)) {
    ThrowUsage("shrink_factor must be in (0, 1)");
  }
  while (vocab.size() > target_size) {
    for (int k = 0; k < options.em_iterations_per_round; ++k) {
      vocab = EmStep(corpus, vocab).vocab;
    }
    const std::size_t n = vocab.size();
    std::vector<double> freq(n, 0.0);
    std::vector<double> chunk_weight(n, 0.0);
    double chunk_total = 0.0;
    std::vector<TokenId> seen;
    for (const auto& [chunk, w] : corpus.chunks) {
      const Segmentation seg = Viterbi(BuildLattice(vocab, chunk));
      chunk_total += w;
      seen.assign(seg.ids.begin(), seg.ids.end());
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (TokenId id : seg.ids) freq[id] += w;
      for (TokenId id : seen) chunk_weight[id] += w;
    }
    double vsum = 0.0;
    for (std::size_t id = kNumReserved; id < n; ++id) vsum += freq[id];

    struct Candidate {
      TokenId id;
      double loss;
    };
    std::vector<Candidate> candidates;
    std::size_t fixed = kNumReserved;
    for (std::size_t id = kNumReserved; id < n; ++id) {
      const auto tid = static_cast<TokenId>(id);
      if (vocab.chars(tid).size() == 1) {
        ++fixed;
        continue;
      }
      if (freq[id] == 0.0) {
        candidates.push_back({tid, 0.0});
        continue;
      }
      const Segmentation alt =
          Viterbi(BuildLattice(vocab, vocab.chars(tid), tid));
      const double f = chunk_weight[id] / chunk_total;
      const double logprob_piece = std::log(freq[id]) - std::log(vsum);
      const double logsum_alt =
          std::log(vsum + freq[id] * static_cast<double>(alt.ids.size() - 1));
      double logprob_alt = 0.0;
      for (TokenId a : alt.ids) {
        logprob_alt += std::log(freq[a] + freq[id]) - logsum_alt;
      }
      candidates.push_back({tid, f * (logprob_piece - logprob_alt)});
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](const Candidate& a, const Candidate& b) {
                if (a.loss != b.loss) return a.loss > b.loss;
                return vocab.piece(a.id).text < vocab.piece(b.id).text;
              });
    std::size_t next_size = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * options.shrink_factor));
    next_size = std::max(next_size, target_size);
    if (next_size >= n) next_size = n - 1;
    const std::size_t keep = next_size - fixed;
    std::vector<bool> kept(n, false);
    for (std::size_t id = kNumReserved; id < n; ++id) {
      kept[id] = vocab.chars(static_cast<TokenId>(id)).size() == 1;
    }
    for (std::size_t i = 0; i < keep && i < candidates.size(); ++i) {
      kept[candidates[i].id] = true;
    }
    std::vector<Piece> pieces;
    double log_sum = kNegInf;
    for (std::size_t id = kNumReserved; id < n; ++id) {
      if (!kept[id]) continue;
      pieces.push_back(vocab.pieces()[id]);
      log_sum = LogAddExp(log_sum, pieces.back().log_prob);
    }
    for (auto& p : pieces) p.log_prob -= log_sum;
    vocab = Vocab::FromPieces(std::move(pieces));
  }
  return vocab;
}

Vocab TrainVocab(std::span<const std::string> sentences,
                 const TrainerOptions& options) {
  const TrainingCorpus corpus = BuildTrainingCorpus(sentences);
  if (corpus.chunks.empty()) ThrowData("empty training corpus");
  const std::size_t required = corpus.characters.size() + kNumReserved;
  if (options.vocab_size < required) {
    ThrowUsage("vocab_size " + std::to_string(options.vocab_size) +
               " is below characters + reserved ids (" +
               std::to_string(required) + ")");
  }
  std::size_t seed_size = options.seed_size;
  if (seed_size == 0) {
    seed_size = std::max(corpus.characters.size(), 8 * options.vocab_size);
  }
  Vocab vocab = BuildSeedVocab(corpus, seed_size, options.max_piece_chars);
  for (int k = 0; k < options.initial_em_iterations; ++k) {
    vocab = EmStep(corpus, vocab).vocab;
  }
  if (vocab.size() > options.vocab_size) {
    vocab = PruneVocab(corpus, std::move(vocab), options.vocab_size,
                       options.prune);
  }
  for (int k = 0; k < options.final_em_iterations; ++k) {
    vocab = EmStep(corpus, vocab).vocab;
  }
  std::vector<Piece> pieces(vocab.pieces().begin() + kNumReserved,
                            vocab.pieces().end());
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.text < b.text;
  });
  return Vocab::FromPieces(std::move(pieces));
}

}  // namespace dt5::unigram
