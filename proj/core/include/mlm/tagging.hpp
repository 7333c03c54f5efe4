// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlm/tokenizer.hpp"

namespace mlm {

struct TaggedWord {
  std::string word;
  std::string label;

  friend bool operator==(const TaggedWord&, const TaggedWord&) = default;
};

using TaggedSentence = std::vector<TaggedWord>;

// Word-level labelled corpus. `labels` is the sorted inventory of every label
// that occurs; `repairs` counts BIO transitions rewritten while reading.
struct TagDataset {
  std::vector<TaggedSentence> sentences;
  std::vector<std::string> labels;
  size_t repairs = 0;

  void rebuild_inventory();
  // Index of label in the inventory, or -1.
  int32_t label_id(std::string_view label) const;
  size_t num_words() const;
};

// CoNLL-U: FORM (column 2) and UPOS (column 4) of each word line. Comment
// lines, multiword ranges ("3-4") and empty nodes ("5.1") are skipped; a blank
// line ends a sentence. Lines without 10 tab-separated columns raise
// DataError naming the line.
TagDataset parse_conllu(std::string_view text);
TagDataset read_conllu(const std::filesystem::path& path);

// word<TAB>tag lines, blank line between sentences. Tags must be O, B-X or
// I-X; an I-X that does not continue a B-X/I-X is rewritten to B-X.
TagDataset parse_bio(std::string_view text);
TagDataset read_bio(const std::filesystem::path& path);

bool is_bio_tag(std::string_view tag);

// Rewrites invalid I-X transitions to B-X in place; returns how many changed.
size_t repair_bio(std::vector<std::string>& tags);

// One model input window built from a run of consecutive words. Each word's
// label sits on its first subword; continuation subwords and the [BOS]/[EOS]
// positions carry kIgnoreLabel.
struct AlignedChunk {
  std::vector<TokenId> ids;
  std::vector<int32_t> labels;
  std::vector<size_t> first_subword;  // position of each word's first subword
  size_t word_offset = 0;             // index of the chunk's first word
};

// Splits the sentence into as few windows of at most max_len positions as
// needed; a single word longer than max_len - 2 subwords keeps only its
// leading subwords. Throws DataError when a word tokenizes to nothing.
std::vector<AlignedChunk> align_labels(std::span<const std::string> words,
                                       std::span<const int32_t> label_ids, const Tokenizer& tok,
                                       size_t max_len);

// Reads one prediction per word back out of per-position predictions for
// each chunk (predictions[c][position]).
std::vector<int32_t> gather_word_predictions(std::span<const AlignedChunk> chunks,
                                             const std::vector<std::vector<int32_t>>& predictions);

}  // namespace mlm
