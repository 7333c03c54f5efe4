// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mlm/error.hpp"
#include "mlm/utf8.hpp"

namespace mlm {

std::vector<std::string> SpecialTokens::defaults() {
  return {std::string(kPad), std::string(kBos), std::string(kEos), std::string(kUnk),
          std::string(kMask)};
}

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> pieces;
  if (text.empty()) return pieces;
  std::string current(kBoundaryMarker);
  for (char c : text) {
    if (c == ' ') {
      pieces.push_back(std::move(current));
      current.assign(kBoundaryMarker);
    } else {
      current.push_back(c);
    }
  }
  pieces.push_back(std::move(current));
  return pieces;
}

std::string Tokenizer::pair_key(std::string_view left, std::string_view right) {
  std::string key = std::to_string(left.size());
  key.push_back(':');
  key.append(left);
  key.append(right);
  return key;
}

Tokenizer::Tokenizer(std::vector<std::string> specials, std::vector<std::string> alphabet,
                     std::vector<MergeRule> merges)
    : specials_(std::move(specials)), alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  auto add_token = [&](const std::string& t, const char* what) {
    if (!ids_.emplace(t, static_cast<TokenId>(tokens_.size())).second) {
      throw DataError(std::string("duplicate token string in ") + what + ": " + t);
    }
    tokens_.push_back(t);
  };
  for (const auto& s : specials_) add_token(s, "specials");
  for (const auto& c : alphabet_) {
    if (utf8::split_chars(c).size() != 1) {
      throw DataError("alphabet entry is not a single character: " + c);
    }
    add_token(c, "alphabet");
  }
  auto role = [&](std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end() || it->second >= specials_.size()) {
      throw DataError("missing special token " + std::string(name));
    }
    return it->second;
  };
  pad_ = role(SpecialTokens::kPad);
  bos_ = role(SpecialTokens::kBos);
  eos_ = role(SpecialTokens::kEos);
  unk_ = role(SpecialTokens::kUnk);
  mask_ = role(SpecialTokens::kMask);

  for (size_t r = 0; r < merges_.size(); ++r) {
    const auto& m = merges_[r];
    if (m.rank != r) throw DataError("merge ranks must be contiguous from 0");
    for (const auto* side : {&m.left, &m.right}) {
      auto it = ids_.find(*side);
      if (it == ids_.end() || it->second < specials_.size()) {
        throw DataError("merge " + std::to_string(r) + " uses unknown token: " + *side);
      }
    }
    std::string merged = m.left + m.right;
    auto it = ids_.find(merged);
    if (it != ids_.end() && it->second < specials_.size()) {
      throw DataError("merge " + std::to_string(r) + " produces a special token");
    }
    if (!merge_ranks_.emplace(pair_key(m.left, m.right), m.rank).second) {
      throw DataError("duplicate merge rule at rank " + std::to_string(r));
    }
    if (it == ids_.end()) {
      ids_.emplace(merged, static_cast<TokenId>(tokens_.size()));
      tokens_.push_back(std::move(merged));
    }
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

using PairKey = uint64_t;

constexpr PairKey make_pair_key(uint32_t a, uint32_t b) {
  return (static_cast<uint64_t>(a) << 32) | b;
}

struct TrainWord {
  std::vector<uint32_t> symbols;
  int64_t count = 0;
};

// Non-overlapping left-to-right pair occurrences: a run of k equal symbols
// contributes floor(k/2) copies of (x, x).
template <typename Fn>
void for_each_pair(const std::vector<uint32_t>& s, Fn&& fn) {
  bool prev_was_equal_pair = false;
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    const bool equal = s[i] == s[i + 1];
    if (equal && prev_was_equal_pair && s[i - 1] == s[i]) {
      prev_was_equal_pair = false;
      continue;
    }
    fn(make_pair_key(s[i], s[i + 1]));
    prev_was_equal_pair = equal;
  }
}

void apply_merge(std::vector<uint32_t>& s, uint32_t left, uint32_t right, uint32_t merged) {
  size_t out = 0;
  for (size_t i = 0; i < s.size();) {
    if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
      s[out++] = merged;
      i += 2;
    } else {
      s[out++] = s[i++];
    }
  }
  s.resize(out);
}

}  // namespace

Tokenizer Tokenizer::train(const Corpus& corpus, size_t vocab_size,
                           std::vector<std::string> specials) {
  if (corpus.empty()) throw DataError("cannot train a tokenizer on an empty corpus");

  std::map<std::string, int64_t> word_counts;
  for (const auto& sentence : corpus.sentences) {
    for (auto& piece : pretokenize(sentence)) ++word_counts[std::move(piece)];
  }

  std::set<std::string> alphabet_set;
  for (const auto& [word, _] : word_counts) {
    for (auto& c : utf8::split_chars(word)) alphabet_set.insert(std::move(c));
  }
  std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());
  if (vocab_size < alphabet.size() + specials.size()) {
    throw DataError("vocab below alphabet size: " + std::to_string(vocab_size) + " < " +
                    std::to_string(alphabet.size() + specials.size()));
  }

  std::vector<std::string> symbols(alphabet.begin(), alphabet.end());
  std::unordered_map<std::string, uint32_t> symbol_ids;
  for (uint32_t i = 0; i < symbols.size(); ++i) symbol_ids.emplace(symbols[i], i);
  const std::set<std::string> special_set(specials.begin(), specials.end());

  std::vector<TrainWord> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    TrainWord w;
    w.count = count;
    for (const auto& c : utf8::split_chars(word)) w.symbols.push_back(symbol_ids.at(c));
    words.push_back(std::move(w));
  }

  std::unordered_map<PairKey, int64_t> pair_counts;
  std::unordered_map<PairKey, std::vector<uint32_t>> pair_words;
  for (uint32_t wi = 0; wi < words.size(); ++wi) {
    for_each_pair(words[wi].symbols, [&](PairKey k) {
      pair_counts[k] += words[wi].count;
      auto& list = pair_words[k];
      if (list.empty() || list.back() != wi) list.push_back(wi);
    });
  }

  std::vector<MergeRule> merges;
  size_t vocab = specials.size() + alphabet.size();
  std::vector<uint32_t> visited(words.size(), std::numeric_limits<uint32_t>::max());

  while (vocab < vocab_size) {
    PairKey best = 0;
    int64_t best_count = 0;
    for (const auto& [key, count] : pair_counts) {
      if (count < 2 || count < best_count) continue;
      const auto& l = symbols[key >> 32];
      const auto& r = symbols[key & 0xFFFFFFFFu];
      if (count == best_count) {
        const auto& bl = symbols[best >> 32];
        const auto& br = symbols[best & 0xFFFFFFFFu];
        if (std::tie(l, r) >= std::tie(bl, br)) continue;
      }
      if (special_set.count(l + r) != 0) continue;
      best = key;
      best_count = count;
    }
    if (best_count < 2) break;

    const auto left = static_cast<uint32_t>(best >> 32);
    const auto right = static_cast<uint32_t>(best & 0xFFFFFFFFu);
    std::string merged_str = symbols[left] + symbols[right];
    merges.push_back({symbols[left], symbols[right], static_cast<uint32_t>(merges.size())});

    uint32_t merged;
    if (auto it = symbol_ids.find(merged_str); it != symbol_ids.end()) {
      merged = it->second;
    } else {
      merged = static_cast<uint32_t>(symbols.size());
      symbol_ids.emplace(merged_str, merged);
      symbols.push_back(std::move(merged_str));
      ++vocab;
    }

    const auto stamp = static_cast<uint32_t>(merges.size());
    const std::vector<uint32_t> affected = std::move(pair_words[best]);
    pair_words.erase(best);
    for (uint32_t wi : affected) {
      if (visited[wi] == stamp) continue;
      visited[wi] = stamp;
      auto& w = words[wi];
      for_each_pair(w.symbols, [&](PairKey k) {
        auto it = pair_counts.find(k);
        if ((it->second -= w.count) == 0) pair_counts.erase(it);
      });
      apply_merge(w.symbols, left, right, merged);
      for_each_pair(w.symbols, [&](PairKey k) {
        pair_counts[k] += w.count;
        auto& list = pair_words[k];
        if (list.empty() || list.back() != wi) list.push_back(wi);
      });
    }
  }

  return Tokenizer(std::move(specials), std::move(alphabet), std::move(merges));
}

// ---------------------------------------------------------------------------
// Encode / decode

void Tokenizer::encode_piece(std::string_view piece, std::vector<TokenId>& out) const {
  // Symbols hold token strings; unknown characters become a barrier entry
  // that never merges and emits [UNK].
  struct Symbol {
    std::string text;
    bool unknown = false;
  };
  std::vector<Symbol> syms;
  for (auto& c : utf8::split_chars(piece)) {
    const bool known = ids_.count(c) != 0 && ids_.at(c) >= specials_.size();
    syms.push_back({std::move(c), !known});
  }

  for (;;) {
    uint32_t best_rank = std::numeric_limits<uint32_t>::max();
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      if (syms[i].unknown || syms[i + 1].unknown) continue;
      auto it = merge_ranks_.find(pair_key(syms[i].text, syms[i + 1].text));
      if (it != merge_ranks_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<uint32_t>::max()) break;
    const auto& rule = merges_[best_rank];
    std::vector<Symbol> next;
    next.reserve(syms.size());
    for (size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && !syms[i].unknown && !syms[i + 1].unknown &&
          syms[i].text == rule.left && syms[i + 1].text == rule.right) {
        next.push_back({rule.left + rule.right, false});
        i += 2;
      } else {
        next.push_back(std::move(syms[i]));
        ++i;
      }
    }
    syms = std::move(next);
  }

  for (const auto& s : syms) out.push_back(s.unknown ? unk_ : ids_.at(s.text));
}

std::vector<TokenId> Tokenizer::encode(std::string_view text, bool add_specials) const {
  std::vector<TokenId> out;
  if (add_specials) out.push_back(bos_);
  for (const auto& piece : pretokenize(text)) encode_piece(piece, out);
  if (add_specials) out.push_back(eos_);
  return out;
}

std::vector<TokenId> Tokenizer::encode_word(std::string_view word) const {
  std::vector<TokenId> out;
  if (word.empty()) return out;
  std::string piece(kBoundaryMarker);
  piece.append(word);
  encode_piece(piece, out);
  return out;
}

std::string Tokenizer::decode(std::span<const TokenId> ids, bool strip_specials) const {
  std::string out;
  bool at_segment_start = true;
  for (TokenId id : ids) {
    if (id >= tokens_.size()) throw DataError("unknown token id " + std::to_string(id));
    const bool structural = id == bos_ || id == eos_ || id == pad_;
    if (structural) {
      if (!strip_specials) out += tokens_[id];
      at_segment_start = true;
      continue;
    }
    std::string_view text = tokens_[id];
    if (!is_special(id) && text.starts_with(kBoundaryMarker)) {
      if (!at_segment_start) out.push_back(' ');
      text.remove_prefix(kBoundaryMarker.size());
    }
    at_segment_start = false;
    // Marker characters inside a piece only appear when the piece was built
    // from consecutive spaces.
    size_t pos = 0;
    while (pos < text.size()) {
      if (text.substr(pos).starts_with(kBoundaryMarker)) {
        out.push_back(' ');
        pos += kBoundaryMarker.size();
      } else {
        out.push_back(text[pos++]);
      }
    }
  }
  return out;
}

const std::string& Tokenizer::token(TokenId id) const {
  if (id >= tokens_.size()) throw DataError("unknown token id " + std::to_string(id));
  return tokens_[id];
}

TokenId Tokenizer::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? static_cast<TokenId>(tokens_.size()) : it->second;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kFileMagic = "mlm-bpe";
constexpr int kFileVersion = 1;

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape(std::string_view s, size_t line_no) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i == s.size()) throw DataError("line " + std::to_string(line_no) + ": dangling escape");
    switch (s[i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: throw DataError("line " + std::to_string(line_no) + ": bad escape");
    }
  }
  return out;
}

}  // namespace

std::string Tokenizer::serialize() const {
  std::ostringstream out;
  out << kFileMagic << ' ' << kFileVersion << '\n';
  out << "vocab_size " << tokens_.size() << '\n';
  out << "marker " << kBoundaryMarker << '\n';
  out << "[specials]\n";
  for (size_t i = 0; i < specials_.size(); ++i) out << escape(specials_[i]) << '\t' << i << '\n';
  out << "[alphabet]\n";
  for (const auto& c : alphabet_) out << escape(c) << '\n';
  out << "[merges]\n";
  for (const auto& m : merges_) out << escape(m.left) << '\t' << escape(m.right) << '\n';
  return out.str();
}

Tokenizer Tokenizer::parse(std::string_view text) {
  enum class Section { kHeader, kSpecials, kAlphabet, kMerges } section = Section::kHeader;
  std::vector<std::string> specials, alphabet;
  std::vector<MergeRule> merges;
  long long declared_size = -1;
  bool saw_magic = false;

  size_t line_no = 0;
  size_t pos = 0;
  auto fail = [&](const std::string& msg) -> DataError {
    return DataError("tokenizer file line " + std::to_string(line_no) + ": " + msg);
  };
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (line == "[specials]") { section = Section::kSpecials; continue; }
    if (line == "[alphabet]") { section = Section::kAlphabet; continue; }
    if (line == "[merges]") { section = Section::kMerges; continue; }

    switch (section) {
      case Section::kHeader: {
        if (line.empty()) continue;
        const size_t sp = line.find(' ');
        if (sp == std::string_view::npos) throw fail("expected 'key value'");
        const auto key = line.substr(0, sp);
        const auto value = line.substr(sp + 1);
        if (key == kFileMagic) {
          if (value != std::to_string(kFileVersion)) throw fail("unsupported version");
          saw_magic = true;
        } else if (key == "vocab_size") {
          try {
            declared_size = std::stoll(std::string(value));
          } catch (const std::exception&) {
            throw fail("vocab_size is not a number");
          }
        } else if (key == "marker") {
          if (value != kBoundaryMarker) throw fail("unsupported boundary marker");
        } else {
          throw fail("unknown header field '" + std::string(key) + "'");
        }
        break;
      }
      case Section::kSpecials: {
        const size_t tab = line.find('\t');
        if (tab == std::string_view::npos) throw fail("expected 'token<TAB>id'");
        const auto id_text = line.substr(tab + 1);
        if (id_text != std::to_string(specials.size())) {
          throw fail("special token ids must be 0..n-1 in order");
        }
        specials.push_back(unescape(line.substr(0, tab), line_no));
        break;
      }
      case Section::kAlphabet:
        if (line.empty()) throw fail("empty alphabet entry");
        alphabet.push_back(unescape(line, line_no));
        break;
      case Section::kMerges: {
        const size_t tab = line.find('\t');
        if (tab == std::string_view::npos) throw fail("expected 'left<TAB>right'");
        merges.push_back({unescape(line.substr(0, tab), line_no),
                          unescape(line.substr(tab + 1), line_no),
                          static_cast<uint32_t>(merges.size())});
        break;
      }
    }
  }
  if (!saw_magic) throw DataError("tokenizer file: missing 'mlm-bpe' header");
  Tokenizer tok(std::move(specials), std::move(alphabet), std::move(merges));
  if (declared_size >= 0 && static_cast<size_t>(declared_size) != tok.size()) {
    throw DataError("tokenizer file: vocab_size " + std::to_string(declared_size) +
                    " does not match reconstructed size " + std::to_string(tok.size()));
  }
  return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tokenizer file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write tokenizer file: " + path.string());
  out << serialize();
}

}  // namespace mlm
