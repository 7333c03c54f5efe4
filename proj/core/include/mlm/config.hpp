// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mlm/corpus.hpp"
#include "mlm/model.hpp"
#include "mlm/trainer.hpp"

namespace mlm {

// Values of the small TOML subset read by parse_config: quoted strings,
// integers, floats, true/false and one-line arrays of strings.
using ConfigValue = std::variant<std::string, int64_t, double, bool, std::vector<std::string>>;

// Flat "section.key" -> value map. `base_dir` is the directory of the file
// the tree was read from; relative paths resolve against it.
struct ConfigTree {
  std::map<std::string, ConfigValue> values;
  std::filesystem::path base_dir;
};

// [section] headers, key = value lines, '#' comments. Duplicate keys, keys
// outside a section and malformed lines raise DataError naming the line.
ConfigTree parse_config(std::string_view text, std::string_view source = "<config>");
// Throws DataError naming the path when it cannot be read.
ConfigTree load_config(const std::filesystem::path& path);

enum class DataFormat { kConllu, kBio };

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  size_t vocab_size = kDefaultVocabSize;
  std::filesystem::path tokenizer;
  std::filesystem::path abbreviations;
  std::vector<std::filesystem::path> corpus;
  InputMode input_mode = InputMode::kSentencePerLine;
  std::filesystem::path train_data;
  std::filesystem::path dev_data;
  std::filesystem::path test_data;
  std::optional<DataFormat> data_format;  // unset: by task (pos -> conllu, ner -> bio)
  std::filesystem::path out_dir = "run";
  // Finetuning seeds; 1 is a single run, >= 2 reports mean ± std.
  size_t runs = 1;

  DataFormat format_for_task() const;
};

// Builds a RunConfig from the tree. Unknown sections or keys, wrong value
// types and out-of-range values raise DataError.
RunConfig run_config_from(const ConfigTree& tree);

// Throws DataError naming the first path in `paths` that does not exist.
void require_paths(std::initializer_list<const std::filesystem::path*> paths);

}  // namespace mlm
