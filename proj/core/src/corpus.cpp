// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mlm/error.hpp"
#include "mlm/rng.hpp"
#include "mlm/utf8.hpp"

namespace mlm {

namespace {

const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> list = {
      "Dr.", "Prof.", "Doç.", "Yrd.", "Av.", "Sn.", "Bkz.", "bkz.", "vb.", "vs.", "vd.",
      "Cad.", "Sok.", "Mah.", "Apt.", "No.", "Tel.", "Mr.", "Mrs.", "Ms.", "St.", "Jr.",
      "Öğr.", "Gör.", "Uzm.", "Müh.", "Org.", "Gen.", "Alb.", "Yzb.", "Ltd.", "Şti."};
  return list;
}

bool is_terminator(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x2026; }

bool is_closer(char32_t cp) {
  switch (cp) {
    case U'"': case U'\'': case U')': case U']': case 0x201D: case 0x2019: case 0xBB:
      return true;
    default:
      return false;
  }
}

std::string clean_sentence(std::string_view raw) {
  std::string s(utf8::trim(raw));
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

SentenceSplitter::SentenceSplitter() : abbreviations_(default_abbreviations()) {}

SentenceSplitter::SentenceSplitter(std::vector<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {}

SentenceSplitter SentenceSplitter::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open abbreviations file: " + path.string());
  std::vector<std::string> list;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = utf8::trim(line);
    if (t.empty() || t.front() == '#') continue;
    list.emplace_back(t);
  }
  return SentenceSplitter(std::move(list));
}

bool SentenceSplitter::is_abbreviation(std::string_view token) const {
  return std::find(abbreviations_.begin(), abbreviations_.end(), token) != abbreviations_.end();
}

std::vector<std::string> SentenceSplitter::split(std::string_view text) const {
  std::vector<std::string> out;
  auto emit = [&](size_t begin, size_t end) {
    std::string s = clean_sentence(text.substr(begin, end - begin));
    if (!utf8::trim(s).empty()) out.push_back(std::move(s));
  };

  size_t start = 0;
  size_t token_start = 0;  // byte offset where the current whitespace-free run began
  size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = utf8::next_codepoint(text, pos);
    if (utf8::is_space(cp)) {
      token_start = pos;
      continue;
    }
    if (!is_terminator(cp)) continue;

    // Absorb a run of terminators and closers: "?!", "...", ".\"".
    size_t end = pos;
    while (end < text.size()) {
      size_t probe = end;
      const char32_t next = utf8::next_codepoint(text, probe);
      if (!is_terminator(next) && !is_closer(next)) break;
      end = probe;
    }
    if (cp == U'.' && is_abbreviation(text.substr(token_start, pos - token_start))) {
      pos = end;
      continue;
    }
    // Need whitespace, then an uppercase letter or digit.
    size_t probe = end;
    bool saw_space = false;
    char32_t following = 0;
    while (probe < text.size()) {
      following = utf8::next_codepoint(text, probe);
      if (!utf8::is_space(following)) break;
      saw_space = true;
      following = 0;
    }
    pos = end;
    if (saw_space && following != 0 && (utf8::is_upper(following) || utf8::is_digit(following))) {
      emit(start, end);
      start = end;
    }
  }
  emit(start, text.size());
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  static const SentenceSplitter splitter;
  return splitter.split(text);
}

Corpus dedup(const Corpus& corpus) {
  Corpus out;
  out.source_id = corpus.source_id;
  std::unordered_set<std::string_view> seen;
  seen.reserve(corpus.size());
  const bool has_docs = !corpus.document_ids.empty();
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (!seen.insert(corpus.sentences[i]).second) continue;
    out.sentences.push_back(corpus.sentences[i]);
    if (has_docs) out.document_ids.push_back(corpus.document_ids[i]);
  }
  return out;
}

Corpus sample_sentences(const Corpus& corpus, size_t count, uint64_t seed) {
  if (count > corpus.size()) throw DataError("sample larger than population");
  std::vector<size_t> index(corpus.size());
  std::iota(index.begin(), index.end(), size_t{0});
  Rng rng(seed);
  Corpus out;
  out.source_id = corpus.source_id;
  out.sentences.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(index.size() - i));
    std::swap(index[i], index[j]);
    out.sentences.push_back(corpus.sentences[index[i]]);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open input file: " + path.string());
  std::array<unsigned char, 2> magic{};
  probe.read(reinterpret_cast<char*>(magic.data()), 2);
  const bool gz = probe.gcount() == 2 && magic[0] == 0x1F && magic[1] == 0x8B;
  if (!gz) {
    probe.clear();
    probe.seekg(0);
    std::ostringstream ss;
    ss << probe.rdbuf();
    return ss.str();
  }
  probe.close();

  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw DataError("cannot open gzip file: " + path.string());
  std::string out;
  std::array<char, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(file, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(file);
      throw DataError("corrupt gzip stream: " + path.string());
    }
    if (n == 0) break;
    out.append(buf.data(), static_cast<size_t>(n));
  }
  gzclose(file);
  return out;
}

namespace {

void append_file(Corpus& corpus, const std::filesystem::path& path, InputMode mode,
                 const SentenceSplitter& splitter, uint32_t& next_doc) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  bool doc_open = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (mode == InputMode::kDocumentPerLine) {
      auto sentences = splitter.split(line);
      if (sentences.empty()) continue;
      for (auto& s : sentences) {
        corpus.sentences.push_back(std::move(s));
        corpus.document_ids.push_back(next_doc);
      }
      ++next_doc;
    } else {
      const auto t = utf8::trim(line);
      if (t.empty()) {
        if (doc_open) ++next_doc;
        doc_open = false;
        continue;
      }
      corpus.sentences.emplace_back(t);
      corpus.document_ids.push_back(next_doc);
      doc_open = true;
    }
  }
  if (doc_open) ++next_doc;
}

}  // namespace

Corpus read_corpus(const std::filesystem::path& path, InputMode mode,
                   const SentenceSplitter& splitter) {
  return read_corpora({path}, mode, splitter);
}

Corpus read_corpora(const std::vector<std::filesystem::path>& paths, InputMode mode,
                    const SentenceSplitter& splitter) {
  Corpus corpus;
  uint32_t next_doc = 0;
  for (const auto& p : paths) {
    if (!corpus.source_id.empty()) corpus.source_id += ",";
    corpus.source_id += p.filename().string();
    append_file(corpus, p, mode, splitter, next_doc);
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus: " + path.string());
  for (const auto& s : corpus.sentences) out << s << '\n';
}

}  // namespace mlm
