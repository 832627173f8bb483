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

// Unigram language-model subword tokenizer: vocabulary, segmentation
// lattice, Viterbi encoding, forward-backward EM training and pruning.
//
// Text is normalized by replacing every ' ' with the word-boundary marker
// U+2581. No marker is prepended, so decode(encode(s)) == s whenever every
// character of s is covered by the vocabulary.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dt5::unigram {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kMaskId = 3;
inline constexpr std::size_t kNumReserved = 4;

inline constexpr char32_t kBoundary = 0x2581;  // "▁"
inline constexpr std::string_view kPadPiece = "<pad>";
inline constexpr std::string_view kEosPiece = "</s>";
inline constexpr std::string_view kUnkPiece = "<unk>";
inline constexpr std::string_view kMaskPiece = "<M>";
// Unknown characters are scored this far below the least likely piece.
inline constexpr double kUnkPenalty = 10.0;

struct Piece {
  std::string text;
  double log_prob = 0.0;
};

class Vocab {
 public:
  // Reserved pieces only.
  Vocab();

  // Builds a vocabulary from non-reserved pieces (ids assigned in order,
  // starting at kNumReserved). Throws on duplicates, empty pieces or pieces
  // spelled like a reserved token.
  static Vocab FromPieces(std::vector<Piece> pieces);

  std::size_t size() const { return pieces_.size(); }
  const Piece& piece(TokenId id) const;
  const std::vector<Piece>& pieces() const { return pieces_; }
  // Code points of piece id (empty for reserved ids).
  const std::u32string& chars(TokenId id) const { return chars_[id]; }
  std::optional<TokenId> Find(std::string_view text) const;
  double min_log_prob() const { return min_log_prob_; }

  // Calls fn(end, id) for every piece that matches text starting at pos.
  template <typename Fn>
  void ForEachMatch(std::u32string_view text, std::size_t pos, Fn&& fn) const {
    std::uint32_t node = 0;
    for (std::size_t end = pos; end < text.size(); ++end) {
      node = Child(node, text[end]);
      if (node == kNoNode) return;
      if (trie_[node].id >= 0) fn(end + 1, trie_[node].id);
    }
  }

  // "piece<TAB>log_prob" per line, line number == id, 17 significant digits.
  // Tab, newline and backslash inside pieces are written as \t, \n, \.
  void Save(std::ostream& out) const;
  static Vocab Load(std::istream& in);
  void SaveFile(const std::string& path) const;
  static Vocab LoadFile(const std::string& path);

 private:
  static constexpr std::uint32_t kNoNode = 0xFFFFFFFFu;
  struct TrieNode {
    std::vector<std::pair<char32_t, std::uint32_t>> children;  // sorted
    TokenId id = -1;
  };

  std::uint32_t Child(std::uint32_t node, char32_t c) const;
  void Rebuild();

  std::vector<Piece> pieces_;
  std::vector<std::u32string> chars_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<TrieNode> trie_;
  double min_log_prob_ = 0.0;
};

std::u32string Normalize(std::string_view text);

struct LatticeEdge {
  std::uint32_t end;
  TokenId id;
  double log_prob;
};

// edges[i] holds all edges starting at code point i. Positions not covered
// by a single-character piece get an unknown edge of length one.
struct Lattice {
  std::u32string text;
  std::vector<std::vector<LatticeEdge>> edges;
};

// excluded_id removes one piece from consideration (used when pricing the
// alternative segmentation of a piece during pruning).
Lattice BuildLattice(const Vocab& vocab, std::u32string_view text,
                     TokenId excluded_id = -1);

struct Segmentation {
  TokenIds ids;
  double score = 0.0;  // sum of edge log-probs
};

// Best path: highest score, then fewest pieces, then lexicographically
// smallest piece sequence. Scores are accumulated right to left.
Segmentation Viterbi(const Lattice& lattice);

TokenIds Encode(const Vocab& vocab, std::string_view text);

// Concatenates pieces and maps U+2581 back to ' '. Padding and
// end-of-sequence render as nothing, unknown as U+2047, mask as "<M>".
// Throws dt5::Error(kData) on out-of-range ids.
std::string Decode(const Vocab& vocab, std::span<const TokenId> ids);

// ---------------------------------------------------------------------------
// Training.

// Normalized text split at every boundary marker into weighted chunks. No
// piece may contain the marker except as its first character, so a
// sentence's lattice factorizes over its chunks and training can work on
// distinct chunks.
struct TrainingCorpus {
  std::vector<std::pair<std::u32string, double>> chunks;  // sorted by text
  std::vector<char32_t> characters;                       // sorted, distinct
};

TrainingCorpus BuildTrainingCorpus(std::span<const std::string> sentences);

// Substrings of up to max_piece_chars code points (boundary marker only in
// first position), scored by frequency * length. All single characters are
// kept; the rest fill up to seed_size pieces (reserved ids not counted).
Vocab BuildSeedVocab(const TrainingCorpus& corpus, std::size_t seed_size,
                     std::size_t max_piece_chars = 8);
Vocab BuildSeedVocab(std::span<const std::string> sentences,
                     std::size_t seed_size, std::size_t max_piece_chars = 8);

struct ExpectedCounts {
  std::vector<double> counts;  // indexed by id
  double log_likelihood = 0.0;
};

// Forward-backward marginals over every chunk lattice.
ExpectedCounts ComputeExpectedCounts(const TrainingCorpus& corpus,
                                     const Vocab& vocab);

struct EmResult {
  Vocab vocab;
  double log_likelihood = 0.0;  // before the update
};

EmResult EmStep(const TrainingCorpus& corpus, const Vocab& vocab);

struct PruneOptions {
  double shrink_factor = 0.75;
  int em_iterations_per_round = 2;
};

// Drops multi-character pieces ranked by the Viterbi-approximate likelihood
// loss of removing them until exactly target_size ids remain (reserved ids
// included). Requires target_size >= characters + kNumReserved.
Vocab PruneVocab(const TrainingCorpus& corpus, Vocab vocab,
                 std::size_t target_size, const PruneOptions& options = {});

struct TrainerOptions {
  std::size_t vocab_size = 32000;
  std::size_t seed_size = 0;  // 0: max(characters, 8 * vocab_size)
  std::size_t max_piece_chars = 8;
  int initial_em_iterations = 2;
  int final_em_iterations = 2;
  PruneOptions prune;
};

// Deterministic in corpus order and options. Final pieces are ordered by
// descending log-probability, ties by text.
Vocab TrainVocab(std::span<const std::string> sentences,
                 const TrainerOptions& options = {});

}  // namespace dt5::unigram
