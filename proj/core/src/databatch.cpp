// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/databatch.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mlm/error.hpp"
#include "mlm/rng.hpp"

namespace mlm {

namespace {

// Stream tags keep the shuffle and masking draws independent.
constexpr uint64_t kShuffleTag = 0x5348554646ULL;
constexpr uint64_t kMaskTag = 0x4D41534BULL;

class Packer {
 public:
  Packer(size_t max_len, TokenId bos, TokenId eos, TokenId pad)
      : max_len_(max_len), bos_(bos), eos_(eos), pad_(pad) {
    if (max_len < 4) throw DataError("sequence length too small: " + std::to_string(max_len));
  }

  void add(std::span<const TokenId> sentence) {
    if (sentence.empty()) return;
    if (sentence.size() <= max_len_) {
      place(sentence);
      return;
    }
    auto interior = sentence;
    if (interior.front() == bos_) interior = interior.subspan(1);
    if (!interior.empty() && interior.back() == eos_) interior = interior.first(interior.size() - 1);
    const size_t chunk = max_len_ - 2;
    for (size_t off = 0; off < interior.size(); off += chunk) {
      std::vector<TokenId> piece;
      piece.reserve(max_len_);
      piece.push_back(bos_);
      const size_t n = std::min(chunk, interior.size() - off);
      piece.insert(piece.end(), interior.begin() + static_cast<ptrdiff_t>(off),
                   interior.begin() + static_cast<ptrdiff_t>(off + n));
      piece.push_back(eos_);
      place(piece);
    }
  }

  void flush() {
    if (current_.empty()) return;
    PackedSequence seq;
    seq.attention_len = current_.size();
    seq.ids = std::move(current_);
    seq.ids.resize(max_len_, pad_);
    out_.push_back(std::move(seq));
    current_.clear();
  }

  std::vector<PackedSequence> finish() {
    flush();
    return std::move(out_);
  }

 private:
  void place(std::span<const TokenId> s) {
    if (current_.size() + s.size() > max_len_) flush();
    current_.insert(current_.end(), s.begin(), s.end());
  }

  size_t max_len_;
  TokenId bos_, eos_, pad_;
  std::vector<TokenId> current_;
  std::vector<PackedSequence> out_;
};

}  // namespace

std::vector<PackedSequence> pack(const std::vector<std::vector<TokenId>>& sentences, size_t max_len,
                                 TokenId bos, TokenId eos, TokenId pad) {
  Packer packer(max_len, bos, eos, pad);
  for (const auto& s : sentences) packer.add(s);
  return packer.finish();
}

std::vector<PackedSequence> pack_documents(const std::vector<std::vector<TokenId>>& sentences,
                                           std::span<const uint32_t> document_ids, size_t max_len,
                                           TokenId bos, TokenId eos, TokenId pad) {
  if (document_ids.empty()) return pack(sentences, max_len, bos, eos, pad);
  if (document_ids.size() != sentences.size()) {
    throw DataError("document ids must be parallel to sentences");
  }
  Packer packer(max_len, bos, eos, pad);
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0 && document_ids[i] != document_ids[i - 1]) packer.flush();
    packer.add(sentences[i]);
  }
  return packer.finish();
}

void MaskingConfig::validate() const {
  if (!(mlm_prob >= 0.0 && mlm_prob <= 1.0)) throw DataError("mlm_prob must lie in [0, 1]");
  const auto& p = proportions;
  if (p.mask < 0 || p.random < 0 || p.keep < 0) {
    throw DataError("mask proportions must be non-negative");
  }
  if (std::abs(p.mask + p.random + p.keep - 1.0) > 1e-9) {
    throw DataError("mask proportions must sum to 1");
  }
}

MaskedRow dynamic_mask(const PackedSequence& seq, const MaskingConfig& config,
                       const VocabInfo& vocab, uint64_t epoch, uint64_t seed,
                       uint64_t sequence_index) {
  config.validate();
  const uint64_t effective_epoch = config.dynamic ? epoch : 0;
  MaskedRow row;
  row.inputs = seq.ids;
  row.labels.assign(seq.ids.size(), kIgnoreLabel);
  const uint64_t num_regular = vocab.vocab_size - vocab.num_specials;
  const double mask_cut = config.proportions.mask;
  const double random_cut = config.proportions.mask + config.proportions.random;

  for (size_t pos = 0; pos < seq.attention_len; ++pos) {
    const TokenId original = seq.ids[pos];
    if (original < vocab.num_specials) continue;
    Rng rng = Rng::for_key({kMaskTag, seed, effective_epoch, sequence_index, pos});
    if (!(rng.uniform() < config.mlm_prob)) continue;
    row.labels[pos] = static_cast<int32_t>(original);
    const double action = rng.uniform();
    if (action < mask_cut) {
      row.inputs[pos] = vocab.mask_id;
    } else if (action < random_cut && num_regular > 0) {
      row.inputs[pos] = static_cast<TokenId>(vocab.num_specials + rng.below(num_regular));
    }
  }
  return row;
}

size_t batches_per_epoch(size_t num_sequences, size_t batch_size) {
  if (batch_size == 0) throw DataError("batch size must be positive");
  return (num_sequences + batch_size - 1) / batch_size;
}

std::vector<MaskedBatch> epoch_batches(const std::vector<PackedSequence>& sequences,
                                       size_t batch_size, const MaskingConfig& config,
                                       const VocabInfo& vocab, uint64_t epoch, uint64_t seed) {
  config.validate();
  const size_t n = sequences.size();
  const size_t nb = batches_per_epoch(n, batch_size);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = Rng::for_key({kShuffleTag, seed, epoch});
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }

  const size_t seq_len = n == 0 ? 0 : sequences.front().ids.size();
  std::vector<MaskedBatch> batches;
  batches.reserve(nb);
  for (size_t b = 0; b < nb; ++b) {
    MaskedBatch batch;
    batch.epoch = epoch;
    batch.seed = seed;
    batch.seq_len = seq_len;
    const size_t begin = b * batch_size;
    const size_t end = std::min(n, begin + batch_size);
    batch.rows = end - begin;
    batch.inputs.reserve(batch.rows * seq_len);
    batch.labels.reserve(batch.rows * seq_len);
    for (size_t r = begin; r < end; ++r) {
      const size_t idx = order[r];
      const auto& seq = sequences[idx];
      if (seq.ids.size() != seq_len) throw DataError("packed sequences differ in length");
      MaskedRow row = dynamic_mask(seq, config, vocab, epoch, seed, idx);
      batch.inputs.insert(batch.inputs.end(), row.inputs.begin(), row.inputs.end());
      batch.labels.insert(batch.labels.end(), row.labels.begin(), row.labels.end());
      batch.attention_len.push_back(seq.attention_len);
      batch.sequence_index.push_back(idx);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::string describe_batch(const MaskedBatch& batch, const Tokenizer& tok) {
  std::ostringstream out;
  out << "epoch " << batch.epoch << " seed " << batch.seed << " rows " << batch.rows << '\n';
  for (size_t r = 0; r < batch.rows; ++r) {
    out << '[' << batch.sequence_index[r] << ']';
    for (size_t t = 0; t < batch.attention_len[r]; ++t) {
      const size_t i = r * batch.seq_len + t;
      out << ' ' << tok.token(batch.inputs[i]);
      if (batch.labels[i] != kIgnoreLabel) {
        out << "->" << tok.token(static_cast<TokenId>(batch.labels[i]));
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mlm
