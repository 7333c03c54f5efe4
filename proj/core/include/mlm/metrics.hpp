// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mlm {

// 100 * fraction of equal positions. Throws DataError on length mismatch.
double accuracy(std::span<const std::string> predicted, std::span<const std::string> gold);

struct Entity {
  std::string type;
  size_t start = 0;
  size_t end = 0;  // inclusive

  friend auto operator<=>(const Entity&, const Entity&) = default;
};

// Maximal B-X I-X* runs. An I-X that does not continue an X entity opens a
// new one, which matches what repair_bio would produce.
std::vector<Entity> decode_entities(std::span<const std::string> tags);

struct SpanCounts {
  size_t correct = 0;
  size_t predicted = 0;
  size_t gold = 0;

  SpanCounts& operator+=(const SpanCounts& o) {
    correct += o.correct;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  // Percent. Both sides empty counts as perfect agreement (100); exactly one
  // side empty gives 0.
  double f1() const;
};

SpanCounts span_counts(std::span<const std::string> predicted, std::span<const std::string> gold);

// Micro-averaged exact-match entity F1 over sentences, in percent.
double span_f1(const std::vector<std::vector<std::string>>& predicted,
               const std::vector<std::vector<std::string>>& gold);

// Per-seed task metrics with their mean and sample (n-1) standard deviation.
struct RunSummary {
  std::string task;
  std::vector<uint64_t> seeds;
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;

  // "mean ± std": mean with up to 4 decimals (at least one), std with 2.
  std::string format() const;
};

RunSummary summarize(std::vector<double> values);
std::string format_mean_std(double mean, double stddev);

// Runs `run(seed)` for seed0 .. seed0+n-1 and aggregates. Requires n >= 2.
// A failing seed does not stop the others; if any failed, throws DataError
// listing every failed seed and its message.
RunSummary multi_run(size_t n_seeds, uint64_t seed0, const std::function<double(uint64_t)>& run);

}  // namespace mlm
