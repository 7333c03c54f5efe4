// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlm/model.hpp"
#include "mlm/optim.hpp"

namespace mlm {

// Checkpoint container layout (all integers little-endian):
//
//   bytes 0..7   magic "MLMCKPT1"
//   u32          header length in bytes
//   header       UTF-8 JSON: format version, model config, training step,
//                task, label inventory, seed, adam step, tensor directory
//   tensors      for each directory entry in order: rows*cols IEEE-754
//                binary32 values, row-major
//
// Parameter tensors use the names from Params::refs(); optimizer moments are
// stored as "adam.m.<name>" and "adam.v.<name>".
struct Checkpoint {
  ModelConfig config;
  uint64_t step = 0;
  std::string task = "pretrain";
  std::vector<std::string> labels;
  uint64_t seed = 0;
  Params<float> params;
  std::optional<AdamState<float>> optim;
};

inline constexpr uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

// Writes to a temporary sibling and renames, so an interrupted save never
// replaces the previous file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Validates every tensor shape against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mlm
