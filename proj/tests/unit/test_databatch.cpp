// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mlm/databatch.hpp"
#include "mlm/error.hpp"
#include "mlm/rng.hpp"

namespace mlm {
namespace {

constexpr TokenId kPad = 0, kBos = 1, kEos = 2, kMask = 4;

// Sentence with BOS/EOS and n-2 interior tokens.
std::vector<TokenId> sentence(size_t n, TokenId fill = 7) {
  std::vector<TokenId> s(n, fill);
  s.front() = kBos;
  s.back() = kEos;
  return s;
}

std::vector<size_t> lengths(const std::vector<PackedSequence>& p) {
  std::vector<size_t> out;
  for (const auto& s : p) out.push_back(s.attention_len);
  return out;
}

TEST(Pack, GreedyFill) {
  const auto p = pack({sentence(5), sentence(5), sentence(5)}, 12, kBos, kEos, kPad);
  EXPECT_EQ(lengths(p), (std::vector<size_t>{10, 5}));
  for (const auto& s : p) EXPECT_EQ(s.ids.size(), 12u);
  EXPECT_EQ(p[1].ids[5], kPad);
}

TEST(Pack, ExactFit) {
  const auto p = pack({sentence(8)}, 8, kBos, kEos, kPad);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].attention_len, 8u);
}

TEST(Pack, OnePadEach) {
  const auto p = pack({sentence(7), sentence(7)}, 8, kBos, kEos, kPad);
  EXPECT_EQ(lengths(p), (std::vector<size_t>{7, 7}));
  EXPECT_EQ(p[0].ids[7], kPad);
}

TEST(Pack, OversizedSentenceIsCutAndRewrapped) {
  std::vector<TokenId> s{kBos};
  for (TokenId t = 10; t < 20; ++t) s.push_back(t);
  s.push_back(kEos);
  const auto p = pack({s}, 6, kBos, kEos, kPad);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].ids, (std::vector<TokenId>{kBos, 10, 11, 12, 13, kEos}));
  EXPECT_EQ(p[2].ids, (std::vector<TokenId>{kBos, 18, 19, kEos, kPad, kPad}));
}

TEST(Pack, TooShortRows) {
  EXPECT_THROW(pack({sentence(3)}, 3, kBos, kEos, kPad), DataError);
}

TEST(Pack, DocumentBoundaryForcesNewRow) {
  const std::vector<uint32_t> docs{0, 1};
  const auto p = pack_documents({sentence(3), sentence(3)}, docs, 16, kBos, kEos, kPad);
  EXPECT_EQ(lengths(p), (std::vector<size_t>{3, 3}));
  const auto same = pack_documents({sentence(3), sentence(3)}, std::vector<uint32_t>{0, 0}, 16, kBos, kEos, kPad);
  EXPECT_EQ(lengths(same), (std::vector<size_t>{6}));
}

TEST(Pack, PropertyEveryTokenKeptInOrder) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<TokenId>> sents;
    std::vector<TokenId> interior;
    for (uint64_t i = 0, n = 1 + rng.below(10); i < n; ++i) {
      std::vector<TokenId> s{kBos};
      for (uint64_t k = 0, m = rng.below(15); k < m; ++k) {
        s.push_back(static_cast<TokenId>(5 + rng.below(50)));
        interior.push_back(s.back());
      }
      s.push_back(kEos);
      sents.push_back(s);
    }
    const size_t T = 4 + rng.below(12);
    std::vector<TokenId> seen;
    for (const auto& row : pack(sents, T, kBos, kEos, kPad)) {
      ASSERT_EQ(row.ids.size(), T);
      ASSERT_LE(row.attention_len, T);
      EXPECT_EQ(row.ids[0], kBos);
      EXPECT_EQ(row.ids[row.attention_len - 1], kEos);
      for (size_t i = 0; i < T; ++i) {
        if (i >= row.attention_len) EXPECT_EQ(row.ids[i], kPad);
        else if (row.ids[i] >= 5) seen.push_back(row.ids[i]);
      }
    }
    EXPECT_EQ(seen, interior);
  }
}

PackedSequence row_of(size_t n) {
  PackedSequence s;
  s.ids = sentence(n, 9);
  for (size_t i = 1; i + 1 < n; ++i) s.ids[i] = static_cast<TokenId>(5 + i);
  s.attention_len = n;
  s.ids.push_back(kPad);
  return s;
}

TEST(Mask, ZeroProbabilityIsIdentity) {
  MaskingConfig cfg;
  cfg.mlm_prob = 0;
  const auto seq = row_of(20);
  const MaskedRow r = dynamic_mask(seq, cfg, VocabInfo{kMask, 5, 50}, 0, 1, 0);
  EXPECT_EQ(r.inputs, seq.ids);
  for (int32_t l : r.labels) EXPECT_EQ(l, kIgnoreLabel);
}

TEST(Mask, AlwaysMask) {
  MaskingConfig cfg;
  cfg.mlm_prob = 1;
  cfg.proportions = {1, 0, 0};
  const auto seq = row_of(20);
  const MaskedRow r = dynamic_mask(seq, cfg, VocabInfo{kMask, 5, 50}, 0, 1, 0);
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    const bool candidate = seq.ids[i] >= 5;
    EXPECT_EQ(r.inputs[i], candidate ? kMask : seq.ids[i]);
    EXPECT_EQ(r.labels[i], candidate ? static_cast<int32_t>(seq.ids[i]) : kIgnoreLabel);
  }
}

TEST(Mask, RandomReplacementsAreRegularTokens) {
  MaskingConfig cfg;
  cfg.mlm_prob = 1;
  cfg.proportions = {0, 1, 0};
  for (uint64_t s = 0; s < 50; ++s) {
    const MaskedRow r = dynamic_mask(row_of(30), cfg, VocabInfo{kMask, 5, 12}, 0, 1, s);
    for (size_t i = 1; i < 29; ++i) {
      EXPECT_GE(r.inputs[i], 5u);
      EXPECT_LT(r.inputs[i], 12u);
    }
  }
}

TEST(Mask, SelectionRate) {
  MaskingConfig cfg;
  size_t candidates = 0, selected = 0;
  for (uint64_t s = 0; candidates < 100000; ++s) {
    const auto seq = row_of(64);
    const MaskedRow r = dynamic_mask(seq, cfg, VocabInfo{kMask, 5, 2000}, 0, 3, s);
    for (size_t i = 0; i < seq.attention_len; ++i) {
      if (seq.ids[i] < 5) continue;
      ++candidates;
      selected += r.labels[i] != kIgnoreLabel;
    }
  }
  const double rate = static_cast<double>(selected) / static_cast<double>(candidates);
  EXPECT_GE(rate, 0.14);
  EXPECT_LE(rate, 0.16);
}

TEST(Mask, StaticIgnoresEpoch) {
  MaskingConfig cfg;
  cfg.dynamic = false;
  const auto seq = row_of(60);
  const VocabInfo v{kMask, 5, 100};
  EXPECT_EQ(dynamic_mask(seq, cfg, v, 0, 1, 0).labels, dynamic_mask(seq, cfg, v, 5, 1, 0).labels);
  cfg.dynamic = true;
  EXPECT_NE(dynamic_mask(seq, cfg, v, 0, 1, 0).labels, dynamic_mask(seq, cfg, v, 5, 1, 0).labels);
}

TEST(Mask, ConfigValidation) {
  MaskingConfig cfg;
  cfg.mlm_prob = 1.5;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg.mlm_prob = 0.15;
  cfg.proportions = {0.8, 0.1, 0.2};
  EXPECT_THROW(cfg.validate(), DataError);
  cfg.proportions = {0.9, -0.1, 0.2};
  EXPECT_THROW(cfg.validate(), DataError);
}

std::vector<PackedSequence> corpus_of(size_t n) {
  std::vector<PackedSequence> out;
  for (size_t i = 0; i < n; ++i) {
    PackedSequence s = row_of(10 + i % 7);
    s.ids.resize(20, kPad);
    out.push_back(s);
  }
  return out;
}

TEST(EpochBatches, RemainderBatch) {
  const auto batches = epoch_batches(corpus_of(10), 4, MaskingConfig{}, VocabInfo{kMask, 5, 100}, 0, 1);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].rows, 4u);
  EXPECT_EQ(batches[2].rows, 2u);
  EXPECT_EQ(batches[2].inputs.size(), 2u * batches[2].seq_len);
  EXPECT_EQ(batches_per_epoch(10, 4), 3u);
}

TEST(EpochBatches, EveryRowOnceAndDeterministic) {
  const auto seqs = corpus_of(100);
  const VocabInfo v{kMask, 5, 100};
  const auto a = epoch_batches(seqs, 16, MaskingConfig{}, v, 0, 1);
  const auto b = epoch_batches(seqs, 16, MaskingConfig{}, v, 0, 1);
  std::vector<size_t> seen;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].inputs, b[i].inputs);
    EXPECT_EQ(a[i].labels, b[i].labels);
    seen.insert(seen.end(), a[i].sequence_index.begin(), a[i].sequence_index.end());
  }
  std::sort(seen.begin(), seen.end());
  for (size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
}

TEST(EpochBatches, EpochsDiffer) {
  const auto seqs = corpus_of(100);
  const VocabInfo v{kMask, 5, 100};
  const auto e0 = epoch_batches(seqs, 100, MaskingConfig{}, v, 0, 1);
  const auto e1 = epoch_batches(seqs, 100, MaskingConfig{}, v, 1, 1);
  EXPECT_NE(e0[0].sequence_index, e1[0].sequence_index);
  // Same sequence, different epochs: the masked positions differ somewhere.
  size_t differing = 0;
  for (size_t s = 0; s < seqs.size(); ++s) {
    differing += dynamic_mask(seqs[s], MaskingConfig{}, v, 0, 1, s).labels !=
                 dynamic_mask(seqs[s], MaskingConfig{}, v, 1, 1, s).labels;
  }
  EXPECT_GE(differing, 1u);
}

}  // namespace
}  // namespace mlm
