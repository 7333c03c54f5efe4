// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "mlm/error.hpp"
#include "mlm/utf8.hpp"

namespace mlm {

namespace {

[[noreturn]] void fail_at(std::string_view source, size_t line, const std::string& what) {
  throw DataError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

// Reads a double-quoted string starting at s[pos]; advances pos past it.
std::optional<std::string> read_quoted(std::string_view s, size_t& pos) {
  if (pos >= s.size() || s[pos] != '"') return std::nullopt;
  std::string out;
  for (++pos; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (c == '"') {
      ++pos;
      return out;
    }
    if (c == '\\' && pos + 1 < s.size()) {
      const char e = s[++pos];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '\\': out += '\\'; break;
        case '"': out += '"'; break;
        default: return std::nullopt;
      }
      continue;
    }
    out += c;
  }
  return std::nullopt;
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::optional<ConfigValue> parse_value(std::string_view v) {
  if (v.empty()) return std::nullopt;
  if (v == "true") return ConfigValue(true);
  if (v == "false") return ConfigValue(false);
  if (v.front() == '"') {
    size_t pos = 0;
    auto s = read_quoted(v, pos);
    if (!s || pos != v.size()) return std::nullopt;
    return ConfigValue(*s);
  }
  if (v.front() == '[') {
    if (v.back() != ']') return std::nullopt;
    std::vector<std::string> items;
    std::string_view body = utf8::trim(v.substr(1, v.size() - 2));
    size_t pos = 0;
    while (pos < body.size()) {
      auto s = read_quoted(body, pos);
      if (!s) return std::nullopt;
      items.push_back(std::move(*s));
      while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
      if (pos == body.size()) break;
      if (body[pos] != ',') return std::nullopt;
      ++pos;
      while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
    }
    return ConfigValue(std::move(items));
  }
  std::string digits;
  for (char c : v) {
    if (c != '_') digits += c;
  }
  const bool looks_float = digits.find_first_of(".eE") != std::string::npos;
  if (!looks_float) {
    int64_t i = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) return ConfigValue(i);
    return std::nullopt;
  }
  double d = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
  if (ec == std::errc() && ptr == digits.data() + digits.size() && std::isfinite(d)) return ConfigValue(d);
  return std::nullopt;
}

bool is_bare_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

class Reader {
 public:
  explicit Reader(const ConfigTree& tree) : tree_(tree) {}

  template <typename F>
  void on(const std::string& key, F&& apply) {
    handlers_[key] = std::forward<F>(apply);
  }

  void run() {
    for (const auto& [key, value] : tree_.values) {
      auto it = handlers_.find(key);
      if (it == handlers_.end()) throw DataError("unknown config key '" + key + "'");
      it->second(key, value);
    }
  }

 private:
  const ConfigTree& tree_;
  std::map<std::string, std::function<void(const std::string&, const ConfigValue&)>> handlers_;
};

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw DataError("config key '" + key + "' must be " + expected);
}

uint64_t as_count(const std::string& key, const ConfigValue& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) {
    if (*i >= 0) return static_cast<uint64_t>(*i);
  }
  // 10e3 style counts are accepted when they are whole numbers.
  if (const auto* d = std::get_if<double>(&v)) {
    if (*d >= 0 && *d <= 9e15 && std::floor(*d) == *d) return static_cast<uint64_t>(*d);
  }
  type_error(key, "a non-negative integer");
}

double as_number(const std::string& key, const ConfigValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  type_error(key, "a number");
}

const std::string& as_string(const std::string& key, const ConfigValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  type_error(key, "a string");
}

bool as_bool(const std::string& key, const ConfigValue& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  type_error(key, "true or false");
}

}  // namespace

ConfigTree parse_config(std::string_view text, std::string_view source) {
  ConfigTree tree;
  std::string section;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = utf8::trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || !is_bare_key(utf8::trim(line.substr(1, line.size() - 2)))) {
        fail_at(source, line_no, "malformed section header");
      }
      section = std::string(utf8::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail_at(source, line_no, "expected key = value");
    const std::string_view key = utf8::trim(line.substr(0, eq));
    if (!is_bare_key(key)) fail_at(source, line_no, "malformed key");
    if (section.empty()) fail_at(source, line_no, "key outside a [section]");
    auto value = parse_value(utf8::trim(line.substr(eq + 1)));
    if (!value) fail_at(source, line_no, "unsupported value for '" + std::string(key) + "'");
    const std::string full = section + "." + std::string(key);
    if (!tree.values.emplace(full, std::move(*value)).second) {
      fail_at(source, line_no, "duplicate key '" + full + "'");
    }
    if (end == text.size()) break;
  }
  return tree;
}

ConfigTree load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw DataError("config file not found: " + path.string());
  }
  ConfigTree tree = parse_config(read_text_file(path), path.string());
  tree.base_dir = path.parent_path();
  return tree;
}

DataFormat RunConfig::format_for_task() const {
  if (data_format) return *data_format;
  return train.task == Task::kNer ? DataFormat::kBio : DataFormat::kConllu;
}

RunConfig run_config_from(const ConfigTree& tree) {
  RunConfig rc;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !tree.base_dir.empty()) path = tree.base_dir / path;
    return path.lexically_normal();
  };

  Reader r(tree);
  r.on("model.layers", [&](auto& k, auto& v) { rc.model.num_layers = as_count(k, v); });
  r.on("model.heads", [&](auto& k, auto& v) { rc.model.num_heads = as_count(k, v); });
  r.on("model.head_size", [&](auto& k, auto& v) { rc.model.head_size = as_count(k, v); });
  r.on("model.ffn_size", [&](auto& k, auto& v) { rc.model.ffn_size = as_count(k, v); });
  r.on("model.max_positions", [&](auto& k, auto& v) { rc.model.max_positions = as_count(k, v); });
  r.on("model.dropout", [&](auto& k, auto& v) { rc.model.dropout = as_number(k, v); });
  r.on("model.attention_dropout", [&](auto& k, auto& v) { rc.model.attn_dropout = as_number(k, v); });

  r.on("tokenizer.vocab_size", [&](auto& k, auto& v) { rc.vocab_size = as_count(k, v); });
  r.on("tokenizer.path", [&](auto& k, auto& v) { rc.tokenizer = resolve(as_string(k, v)); });
  r.on("tokenizer.abbreviations", [&](auto& k, auto& v) { rc.abbreviations = resolve(as_string(k, v)); });

  TrainConfig& t = rc.train;
  r.on("train.task", [&](auto& k, auto& v) { t.task = parse_task(as_string(k, v)); });
  r.on("train.batch_size", [&](auto& k, auto& v) { t.batch_size = as_count(k, v); });
  r.on("train.max_steps", [&](auto& k, auto& v) { t.max_steps = as_count(k, v); });
  r.on("train.max_epochs", [&](auto& k, auto& v) { t.max_epochs = as_count(k, v); });
  r.on("train.warmup_ratio", [&](auto& k, auto& v) { t.warmup_ratio = as_number(k, v); });
  r.on("train.checkpoint_every", [&](auto& k, auto& v) { t.checkpoint_every = as_count(k, v); });
  r.on("train.log_every", [&](auto& k, auto& v) { t.log_every = as_count(k, v); });
  r.on("train.clip_norm", [&](auto& k, auto& v) { t.clip_norm = as_number(k, v); });
  r.on("train.dev_fraction", [&](auto& k, auto& v) { t.dev_fraction = as_number(k, v); });

  r.on("schedule.kind", [&](auto& k, auto& v) {
    const std::string& s = as_string(k, v);
    if (s == "linear") {
      t.schedule.kind = ScheduleKind::kLinearDecay;
    } else if (s == "constant") {
      t.schedule.kind = ScheduleKind::kConstantAfterWarmup;
    } else {
      throw DataError("schedule.kind must be \"linear\" or \"constant\", got \"" + s + "\"");
    }
  });
  r.on("schedule.warmup_steps", [&](auto& k, auto& v) { t.schedule.warmup_steps = as_count(k, v); });
  r.on("schedule.peak_lr", [&](auto& k, auto& v) { t.schedule.peak_lr = as_number(k, v); });

  r.on("adam.eps", [&](auto& k, auto& v) { t.adam.eps = as_number(k, v); });
  r.on("adam.beta1", [&](auto& k, auto& v) { t.adam.beta1 = as_number(k, v); });
  r.on("adam.beta2", [&](auto& k, auto& v) { t.adam.beta2 = as_number(k, v); });
  r.on("adam.weight_decay", [&](auto& k, auto& v) { t.adam.weight_decay = as_number(k, v); });

  r.on("masking.prob", [&](auto& k, auto& v) { t.masking.mlm_prob = as_number(k, v); });
  r.on("masking.mask", [&](auto& k, auto& v) { t.masking.proportions.mask = as_number(k, v); });
  r.on("masking.random", [&](auto& k, auto& v) { t.masking.proportions.random = as_number(k, v); });
  r.on("masking.keep", [&](auto& k, auto& v) { t.masking.proportions.keep = as_number(k, v); });
  r.on("masking.dynamic", [&](auto& k, auto& v) { t.masking.dynamic = as_bool(k, v); });

  r.on("data.corpus", [&](auto& k, auto& v) {
    if (const auto* s = std::get_if<std::string>(&v)) {
      rc.corpus = {resolve(*s)};
    } else if (const auto* list = std::get_if<std::vector<std::string>>(&v)) {
      rc.corpus.clear();
      for (const auto& p : *list) rc.corpus.push_back(resolve(p));
    } else {
      type_error(k, "a path or a list of paths");
    }
  });
  r.on("data.input_mode", [&](auto& k, auto& v) {
    const std::string& s = as_string(k, v);
    if (s == "sentence") {
      rc.input_mode = InputMode::kSentencePerLine;
    } else if (s == "document") {
      rc.input_mode = InputMode::kDocumentPerLine;
    } else {
      throw DataError("data.input_mode must be \"sentence\" or \"document\", got \"" + s + "\"");
    }
  });
  r.on("data.train", [&](auto& k, auto& v) { rc.train_data = resolve(as_string(k, v)); });
  r.on("data.dev", [&](auto& k, auto& v) { rc.dev_data = resolve(as_string(k, v)); });
  r.on("data.test", [&](auto& k, auto& v) { rc.test_data = resolve(as_string(k, v)); });
  r.on("data.format", [&](auto& k, auto& v) {
    const std::string& s = as_string(k, v);
    if (s == "conllu") {
      rc.data_format = DataFormat::kConllu;
    } else if (s == "bio") {
      rc.data_format = DataFormat::kBio;
    } else {
      throw DataError("data.format must be \"conllu\" or \"bio\", got \"" + s + "\"");
    }
  });

  r.on("run.seed", [&](auto& k, auto& v) { t.seed = as_count(k, v); });
  r.on("run.out_dir", [&](auto& k, auto& v) { rc.out_dir = as_string(k, v); });
  r.on("run.runs", [&](auto& k, auto& v) { rc.runs = as_count(k, v); });

  r.run();
  return rc;
}

void require_paths(std::initializer_list<const std::filesystem::path*> paths) {
  for (const auto* p : paths) {
    std::error_code ec;
    if (!p->empty() && !std::filesystem::exists(*p, ec)) {
      throw DataError("file not found: " + p->string());
    }
  }
}

}  // namespace mlm
