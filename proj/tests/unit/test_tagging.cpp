// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mlm/databatch.hpp"
#include "mlm/error.hpp"
#include "mlm/rng.hpp"
#include "mlm/tagging.hpp"

namespace mlm {
namespace {

const std::string kData = MLM_TEST_DATA_DIR;

std::vector<std::string> labels_of(const TaggedSentence& s) {
  std::vector<std::string> out;
  for (const auto& w : s) out.push_back(w.label);
  return out;
}

TEST(Conllu, TwoWordSentence) {
  const TagDataset d = parse_conllu("1\tAli\tAli\tPROPN\t_\t_\t2\tnsubj\t_\t_\n"
                                    "2\tgeldi\tgel\tVERB\t_\t_\t0\troot\t_\t_\n");
  ASSERT_EQ(d.sentences.size(), 1u);
  EXPECT_EQ(d.sentences[0], (TaggedSentence{{"Ali", "PROPN"}, {"geldi", "VERB"}}));
  EXPECT_EQ(d.labels, (std::vector<std::string>{"PROPN", "VERB"}));
}

TEST(Conllu, CommentsOnly) {
  EXPECT_TRUE(parse_conllu("# a\n# b\n").sentences.empty());
  EXPECT_TRUE(parse_conllu("").sentences.empty());
}

TEST(Conllu, FixtureSkipsMultiwordRange) {
  const TagDataset d = read_conllu(kData + "/pos_small.conllu");
  ASSERT_EQ(d.sentences.size(), 2u);
  EXPECT_EQ(d.sentences[0].size(), 4u);
  ASSERT_EQ(d.sentences[1].size(), 4u);
  EXPECT_EQ(d.sentences[1][0], (TaggedWord{"Kitap", "NOUN"}));
  EXPECT_EQ(d.sentences[1][1], (TaggedWord{"ı", "PRON"}));
  EXPECT_EQ(d.num_words(), 8u);
  EXPECT_EQ(d.label_id("VERB"), 4);
  EXPECT_EQ(d.label_id("X"), -1);
}

TEST(Conllu, EmptyNodesSkipped) {
  const TagDataset d = parse_conllu("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n"
                                    "1.1\tb\tb\tY\t_\t_\t_\t_\t_\t_\n");
  EXPECT_EQ(d.sentences[0].size(), 1u);
}

TEST(Conllu, BadColumnCountNamesLine) {
  try {
    parse_conllu("# c\n1\tAli\tAli\tPROPN\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Bio, Fixture) {
  const TagDataset d = read_bio(kData + "/ner_small.bio");
  ASSERT_EQ(d.sentences.size(), 2u);
  EXPECT_EQ(labels_of(d.sentences[0]), (std::vector<std::string>{"B-LOC", "O"}));
  EXPECT_EQ(labels_of(d.sentences[1]), (std::vector<std::string>{"B-PER", "I-PER", "B-LOC", "O", "O"}));
  EXPECT_EQ(d.repairs, 1u);
}

TEST(Bio, EmptyAndErrors) {
  EXPECT_TRUE(parse_bio("").sentences.empty());
  EXPECT_THROW(parse_bio("Ankara\n"), DataError);
  EXPECT_THROW(parse_bio("Ankara\tLOC\n"), DataError);
}

TEST(Bio, RepairRule) {
  std::vector<std::string> t{"I-PER", "I-PER", "O", "I-LOC", "B-ORG", "I-LOC", "I-LOC"};
  EXPECT_EQ(repair_bio(t), 3u);
  EXPECT_EQ(t, (std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC", "B-ORG", "B-LOC", "I-LOC"}));
  EXPECT_TRUE(is_bio_tag("O"));
  EXPECT_TRUE(is_bio_tag("B-MISC"));
  EXPECT_FALSE(is_bio_tag("B-"));
  EXPECT_FALSE(is_bio_tag("PER"));
}

Tokenizer toy_tokenizer() {
  Corpus c;
  c.sentences = {"ev evler evlerde kitap kitaplar", "ev kitap evde"};
  return Tokenizer::train(c, 40);
}

TEST(Align, FirstSubwordCarriesLabel) {
  const Tokenizer tok = toy_tokenizer();
  const std::vector<std::string> words{"ev", "kitaplarda", "ev"};
  const std::vector<int32_t> labels{0, 1, 2};
  const auto chunks = align_labels(words, labels, tok, 64);
  ASSERT_EQ(chunks.size(), 1u);
  const AlignedChunk& c = chunks[0];
  EXPECT_EQ(c.ids.front(), tok.bos_id());
  EXPECT_EQ(c.ids.back(), tok.eos_id());
  ASSERT_EQ(c.first_subword.size(), 3u);
  const size_t pieces = tok.encode_word("kitaplarda").size();
  ASSERT_GT(pieces, 1u);
  EXPECT_EQ(c.labels[c.first_subword[1]], 1);
  for (size_t k = 1; k < pieces; ++k) EXPECT_EQ(c.labels[c.first_subword[1] + k], kIgnoreLabel);
  EXPECT_EQ(c.labels[0], kIgnoreLabel);
  EXPECT_EQ(c.labels.back(), kIgnoreLabel);
}

TEST(Align, EmptyWordIsAnError) {
  const Tokenizer tok = toy_tokenizer();
  const std::vector<std::string> words{"ev", ""};
  EXPECT_THROW(align_labels(words, std::vector<int32_t>{0, 1}, tok, 16), DataError);
}

TEST(Align, WindowingAndInverseProperty) {
  const Tokenizer tok = toy_tokenizer();
  const std::vector<std::string> vocab{"ev", "evler", "kitaplarda", "evde", "kitap", "zzz"};
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    std::vector<int32_t> labels;
    for (uint64_t i = 0, n = 1 + rng.below(30); i < n; ++i) {
      words.push_back(vocab[rng.below(vocab.size())]);
      labels.push_back(static_cast<int32_t>(rng.below(5)));
    }
    const size_t max_len = 4 + rng.below(20);
    const auto chunks = align_labels(words, labels, tok, max_len);
    std::vector<std::vector<int32_t>> predictions;
    size_t next_word = 0;
    for (const auto& c : chunks) {
      ASSERT_LE(c.ids.size(), max_len);
      EXPECT_EQ(c.word_offset, next_word);
      next_word += c.first_subword.size();
      predictions.push_back(c.labels);  // a perfect tagger
    }
    EXPECT_EQ(next_word, words.size());
    EXPECT_EQ(gather_word_predictions(chunks, predictions), labels);
  }
}

}  // namespace
}  // namespace mlm
