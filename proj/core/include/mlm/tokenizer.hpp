// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlm/corpus.hpp"

namespace mlm {

using TokenId = uint32_t;

// U+2581 LOWER ONE EIGHTH BLOCK. Replaces each space and is also prefixed to
// the text, so every word-initial piece starts with it.
inline constexpr std::string_view kBoundaryMarker = "\xE2\x96\x81";

struct MergeRule {
  std::string left;
  std::string right;
  uint32_t rank = 0;

  friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

struct SpecialTokens {
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kBos = "[BOS]";
  static constexpr std::string_view kEos = "[EOS]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kMask = "[MASK]";

  // Order fixes the ids: [PAD]=0, [BOS]=1, [EOS]=2, [UNK]=3, [MASK]=4.
  static std::vector<std::string> defaults();
};

inline constexpr size_t kDefaultVocabSize = 2000;

// Splits text into word pieces the way both training and encoding see it:
// marker-prefixed, spaces replaced by the marker, one piece per marker.
std::vector<std::string> pretokenize(std::string_view text);

// BPE model: specials occupy the lowest ids, then the alphabet in byte order,
// then one id per distinct merge output in rank order. Immutable after
// construction; encode/decode may be called concurrently.
class Tokenizer {
 public:
  Tokenizer(std::vector<std::string> specials, std::vector<std::string> alphabet,
            std::vector<MergeRule> merges);

  // Greedy BPE: repeatedly fuse the most frequent adjacent pair (counted
  // non-overlapping, left to right, weighted by word frequency), ties broken
  // by the smaller (left, right) byte string. Stops at vocab_size or when no
  // pair occurs at least twice.
  static Tokenizer train(const Corpus& corpus, size_t vocab_size,
                         std::vector<std::string> specials = SpecialTokens::defaults());

  static Tokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static Tokenizer parse(std::string_view text);

  std::vector<TokenId> encode(std::string_view text, bool add_specials) const;
  // Ids for " " + word, i.e. exactly the ids the word gets inside a sentence.
  std::vector<TokenId> encode_word(std::string_view word) const;

  // Throws DataError("unknown token id") for ids outside the vocabulary.
  // strip_specials drops [BOS], [EOS] and [PAD]; [UNK] and [MASK] always
  // render literally because they stand in for content.
  std::string decode(std::span<const TokenId> ids, bool strip_specials) const;

  size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  // Returns size() when the string is not in the vocabulary.
  TokenId find(std::string_view token) const;

  TokenId pad_id() const { return pad_; }
  TokenId bos_id() const { return bos_; }
  TokenId eos_id() const { return eos_; }
  TokenId unk_id() const { return unk_; }
  TokenId mask_id() const { return mask_; }
  size_t num_specials() const { return specials_.size(); }
  bool is_special(TokenId id) const { return id < specials_.size(); }

  const std::vector<std::string>& specials() const { return specials_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<MergeRule>& merges() const { return merges_; }

  friend bool operator==(const Tokenizer& a, const Tokenizer& b) {
    return a.specials_ == b.specials_ && a.alphabet_ == b.alphabet_ && a.merges_ == b.merges_;
  }

 private:
  void encode_piece(std::string_view piece, std::vector<TokenId>& out) const;
  static std::string pair_key(std::string_view left, std::string_view right);

  std::vector<std::string> specials_;
  std::vector<std::string> alphabet_;
  std::vector<MergeRule> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  std::unordered_map<std::string, uint32_t> merge_ranks_;
  TokenId pad_ = 0, bos_ = 0, eos_ = 0, unk_ = 0, mask_ = 0;
};

}  // namespace mlm
