// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlm/tokenizer.hpp"

namespace mlm {

// Label value for positions that do not contribute to the loss.
inline constexpr int32_t kIgnoreLabel = -100;

// One training row. ids.size() is the sequence capacity T; positions at or
// after attention_len hold [PAD].
struct PackedSequence {
  std::vector<TokenId> ids;
  size_t attention_len = 0;
};

// Packs [BOS] ... [EOS] sentences in order. A sentence that does not fit in
// the current row starts a new row; a sentence longer than T is cut into
// chunks of T-2 interior tokens, each re-wrapped in [BOS]/[EOS]. Rows are
// padded to exactly T. Throws DataError for T < 4.
std::vector<PackedSequence> pack(const std::vector<std::vector<TokenId>>& sentences, size_t max_len,
                                 TokenId bos, TokenId eos, TokenId pad);

// Same, with a row break forced at every change of document id.
std::vector<PackedSequence> pack_documents(const std::vector<std::vector<TokenId>>& sentences,
                                           std::span<const uint32_t> document_ids, size_t max_len,
                                           TokenId bos, TokenId eos, TokenId pad);

struct MaskProportions {
  double mask = 0.8;
  double random = 0.1;
  double keep = 0.1;
};

struct MaskingConfig {
  double mlm_prob = 0.15;
  MaskProportions proportions;
  // Static masking ignores the epoch so every epoch sees the same pattern.
  bool dynamic = true;

  // Throws DataError unless mlm_prob is in [0, 1] and proportions are
  // non-negative and sum to 1 within 1e-9.
  void validate() const;
};

// Vocabulary facts needed by the masker: ids below num_specials are special;
// random replacements are drawn from [num_specials, vocab_size).
struct VocabInfo {
  TokenId mask_id = 0;
  size_t num_specials = 0;
  size_t vocab_size = 0;

  static VocabInfo from(const Tokenizer& tok) {
    return {tok.mask_id(), tok.num_specials(), tok.size()};
  }
};

struct MaskedRow {
  std::vector<TokenId> inputs;
  std::vector<int32_t> labels;
};

// Selects each non-special, non-pad position independently with mlm_prob,
// then replaces it with [MASK] / a random non-special token / itself with the
// configured proportions. The outcome at every position is a pure function of
// (seed, epoch, sequence_index, position).
MaskedRow dynamic_mask(const PackedSequence& seq, const MaskingConfig& config,
                       const VocabInfo& vocab, uint64_t epoch, uint64_t seed,
                       uint64_t sequence_index);

struct MaskedBatch {
  size_t rows = 0;
  size_t seq_len = 0;
  std::vector<TokenId> inputs;        // rows x seq_len, row-major
  std::vector<int32_t> labels;        // rows x seq_len, kIgnoreLabel where unselected
  std::vector<size_t> attention_len;  // per row
  std::vector<size_t> sequence_index; // which packed sequence each row came from
  uint64_t epoch = 0;
  uint64_t seed = 0;
};

// All batches of one epoch: a seed- and epoch-keyed Fisher-Yates shuffle of
// the packed sequences, cut into ceil(N / batch_size) batches.
std::vector<MaskedBatch> epoch_batches(const std::vector<PackedSequence>& sequences,
                                       size_t batch_size, const MaskingConfig& config,
                                       const VocabInfo& vocab, uint64_t epoch, uint64_t seed);

size_t batches_per_epoch(size_t num_sequences, size_t batch_size);

// Human-readable dump of a batch, one row per line, labels shown as
// token->original.
std::string describe_batch(const MaskedBatch& batch, const Tokenizer& tok);

}  // namespace mlm
