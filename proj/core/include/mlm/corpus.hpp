// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mlm {

// An ordered list of sentences. Each sentence is non-empty after trimming and
// holds no newline. `document_ids` is either empty (one document) or parallel
// to `sentences`; packing never lets a training sequence span two documents.
struct Corpus {
  std::vector<std::string> sentences;
  std::vector<uint32_t> document_ids;
  std::string source_id;

  size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
};

enum class InputMode {
  kDocumentPerLine,  // each line is a document; run the sentence splitter
  kSentencePerLine,  // each line is a sentence; blank lines end documents
};

// Rule-based sentence splitter. A sentence ends at one of . ! ? or U+2026,
// optionally followed by closing quotes or brackets, when the next
// non-whitespace character is an uppercase letter or a digit. A period that
// closes a listed abbreviation ("Dr.", "vb.") never ends a sentence.
class SentenceSplitter {
 public:
  SentenceSplitter();
  explicit SentenceSplitter(std::vector<std::string> abbreviations);

  // One abbreviation per line, '#' comments and blank lines ignored.
  static SentenceSplitter from_file(const std::filesystem::path& path);

  std::vector<std::string> split(std::string_view text) const;

  const std::vector<std::string>& abbreviations() const { return abbreviations_; }

 private:
  bool is_abbreviation(std::string_view token) const;

  std::vector<std::string> abbreviations_;
};

std::vector<std::string> split_sentences(std::string_view text);

// Keeps the first occurrence of every exact-match sentence, in order.
Corpus dedup(const Corpus& corpus);

// Uniform sample of `count` distinct indices without replacement (partial
// Fisher-Yates over an index array driven by mlm::Rng). The result keeps the
// draw order and carries no document structure.
Corpus sample_sentences(const Corpus& corpus, size_t count, uint64_t seed);

// Whole file as bytes; gzip input is detected by its 1f 8b magic.
std::string read_text_file(const std::filesystem::path& path);

Corpus read_corpus(const std::filesystem::path& path, InputMode mode,
                   const SentenceSplitter& splitter = SentenceSplitter());

// Concatenates several files; document ids continue across files.
Corpus read_corpora(const std::vector<std::filesystem::path>& paths, InputMode mode,
                    const SentenceSplitter& splitter = SentenceSplitter());

// One sentence per line, UTF-8, trailing newline after each.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace mlm
