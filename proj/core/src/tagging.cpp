// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/tagging.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mlm/corpus.hpp"
#include "mlm/databatch.hpp"
#include "mlm/error.hpp"

namespace mlm {

void TagDataset::rebuild_inventory() {
  std::set<std::string> seen;
  for (const auto& s : sentences) {
    for (const auto& w : s) seen.insert(w.label);
  }
  labels.assign(seen.begin(), seen.end());
}

int32_t TagDataset::label_id(std::string_view label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) return -1;
  return static_cast<int32_t>(it - labels.begin());
}

size_t TagDataset::num_words() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  size_t start = 0;
  for (;;) {
    const size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

// Calls fn(line_no, line) for each line, with any trailing '\r' removed.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  size_t pos = 0;
  size_t line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    pos = eol + 1;
  }
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TagDataset parse_conllu(std::string_view text) {
  TagDataset ds;
  TaggedSentence current;
  for_each_line(text, [&](size_t line_no, std::string_view line) {
    if (is_blank(line)) {
      if (!current.empty()) ds.sentences.push_back(std::move(current));
      current.clear();
      return;
    }
    if (line.front() == '#') return;
    const auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw DataError("CoNLL-U line " + std::to_string(line_no) + ": expected 10 columns, found " +
                      std::to_string(cols.size()));
    }
    const auto id = cols[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) return;
    if (cols[1].empty() || cols[3].empty()) {
      throw DataError("CoNLL-U line " + std::to_string(line_no) + ": empty FORM or UPOS");
    }
    current.push_back({std::string(cols[1]), std::string(cols[3])});
  });
  if (!current.empty()) ds.sentences.push_back(std::move(current));
  ds.rebuild_inventory();
  return ds;
}

TagDataset read_conllu(const std::filesystem::path& path) { return parse_conllu(read_all(path)); }

bool is_bio_tag(std::string_view tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

size_t repair_bio(std::vector<std::string>& tags) {
  size_t fixed = 0;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (!tags[i].starts_with("I-")) continue;
    const std::string_view type = std::string_view(tags[i]).substr(2);
    const bool continues = i > 0 && tags[i - 1].size() > 2 && tags[i - 1][1] == '-' &&
                           std::string_view(tags[i - 1]).substr(2) == type;
    if (!continues) {
      tags[i][0] = 'B';
      ++fixed;
    }
  }
  return fixed;
}

TagDataset parse_bio(std::string_view text) {
  TagDataset ds;
  TaggedSentence current;
  auto finish = [&] {
    if (current.empty()) return;
    std::vector<std::string> tags;
    for (const auto& w : current) tags.push_back(w.label);
    ds.repairs += repair_bio(tags);
    for (size_t i = 0; i < tags.size(); ++i) current[i].label = std::move(tags[i]);
    ds.sentences.push_back(std::move(current));
    current.clear();
  };
  for_each_line(text, [&](size_t line_no, std::string_view line) {
    if (is_blank(line)) {
      finish();
      return;
    }
    const auto cols = split_tabs(line);
    if (cols.size() < 2 || cols[1].empty()) {
      throw DataError("BIO line " + std::to_string(line_no) + ": missing tag column");
    }
    if (cols.size() > 2) {
      throw DataError("BIO line " + std::to_string(line_no) + ": expected word<TAB>tag");
    }
    if (cols[0].empty()) throw DataError("BIO line " + std::to_string(line_no) + ": empty word");
    if (!is_bio_tag(cols[1])) {
      throw DataError("BIO line " + std::to_string(line_no) + ": invalid tag '" +
                      std::string(cols[1]) + "'");
    }
    current.push_back({std::string(cols[0]), std::string(cols[1])});
  });
  finish();
  ds.rebuild_inventory();
  return ds;
}

TagDataset read_bio(const std::filesystem::path& path) { return parse_bio(read_all(path)); }

std::vector<AlignedChunk> align_labels(std::span<const std::string> words,
                                       std::span<const int32_t> label_ids, const Tokenizer& tok,
                                       size_t max_len) {
  if (max_len < 3) throw DataError("max_len too small for alignment");
  if (!label_ids.empty() && label_ids.size() != words.size()) {
    throw DataError("labels do not match words");
  }
  const size_t room = max_len - 2;
  std::vector<AlignedChunk> chunks;
  AlignedChunk current;
  auto open = [&](size_t word_index) {
    current = AlignedChunk{};
    current.word_offset = word_index;
    current.ids.push_back(tok.bos_id());
    current.labels.push_back(kIgnoreLabel);
  };
  auto close = [&] {
    current.ids.push_back(tok.eos_id());
    current.labels.push_back(kIgnoreLabel);
    chunks.push_back(std::move(current));
  };

  open(0);
  for (size_t w = 0; w < words.size(); ++w) {
    std::vector<TokenId> pieces = tok.encode_word(words[w]);
    if (pieces.empty()) throw DataError("word tokenizes to zero tokens (word " + std::to_string(w) + ")");
    if (pieces.size() > room) pieces.resize(room);
    if (current.ids.size() - 1 + pieces.size() > room) {
      close();
      open(w);
    }
    current.first_subword.push_back(current.ids.size());
    for (size_t k = 0; k < pieces.size(); ++k) {
      current.ids.push_back(pieces[k]);
      current.labels.push_back(k == 0 && !label_ids.empty() ? label_ids[w] : kIgnoreLabel);
    }
  }
  close();
  return chunks;
}

std::vector<int32_t> gather_word_predictions(std::span<const AlignedChunk> chunks,
                                             const std::vector<std::vector<int32_t>>& predictions) {
  if (predictions.size() != chunks.size()) throw DataError("prediction/chunk count mismatch");
  std::vector<int32_t> out;
  for (size_t c = 0; c < chunks.size(); ++c) {
    for (size_t pos : chunks[c].first_subword) {
      if (pos >= predictions[c].size()) throw DataError("prediction row too short");
      out.push_back(predictions[c][pos]);
    }
  }
  return out;
}

}  // namespace mlm
