// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mlm/error.hpp"

namespace mlm {

double accuracy(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) throw DataError("accuracy: length mismatch");
  if (gold.empty()) return 100.0;
  size_t equal = 0;
  for (size_t i = 0; i < gold.size(); ++i) equal += predicted[i] == gold[i] ? 1 : 0;
  return 100.0 * static_cast<double>(equal) / static_cast<double>(gold.size());
}

std::vector<Entity> decode_entities(std::span<const std::string> tags) {
  std::vector<Entity> out;
  bool open = false;
  for (size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    const bool begin = t.starts_with("B-");
    const bool inside = t.starts_with("I-");
    if (inside && open && out.back().type == std::string_view(t).substr(2)) {
      out.back().end = i;
      continue;
    }
    if (begin || inside) {
      out.push_back({t.substr(2), i, i});
      open = true;
    } else {
      open = false;
    }
  }
  return out;
}

double SpanCounts::f1() const {
  if (predicted == 0 && gold == 0) return 100.0;
  if (predicted == 0 || gold == 0 || correct == 0) return 0.0;
  const double p = static_cast<double>(correct) / static_cast<double>(predicted);
  const double r = static_cast<double>(correct) / static_cast<double>(gold);
  return 100.0 * 2.0 * p * r / (p + r);
}

SpanCounts span_counts(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) throw DataError("span_f1: length mismatch");
  const auto p = decode_entities(predicted);
  const auto g = decode_entities(gold);
  const std::set<Entity> gold_set(g.begin(), g.end());
  SpanCounts c;
  c.predicted = p.size();
  c.gold = g.size();
  for (const auto& e : p) c.correct += gold_set.count(e);
  return c;
}

double span_f1(const std::vector<std::vector<std::string>>& predicted,
               const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size()) throw DataError("span_f1: sentence count mismatch");
  SpanCounts total;
  for (size_t i = 0; i < gold.size(); ++i) total += span_counts(predicted[i], gold[i]);
  return total.f1();
}

std::string format_mean_std(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", mean);
  std::string m = buf;
  while (m.back() == '0' && m[m.size() - 2] != '.') m.pop_back();
  std::snprintf(buf, sizeof buf, "%.2f", stddev);
  return m + " ± " + buf;
}

std::string RunSummary::format() const { return format_mean_std(mean, stddev); }

RunSummary summarize(std::vector<double> values) {
  RunSummary s;
  if (values.empty()) throw DataError("cannot summarize zero runs");
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  s.values = std::move(values);
  return s;
}

RunSummary multi_run(size_t n_seeds, uint64_t seed0, const std::function<double(uint64_t)>& run) {
  if (n_seeds < 2) throw DataError("multi_run needs at least two seeds");
  std::vector<double> values;
  std::vector<uint64_t> seeds;
  std::string failures;
  for (size_t i = 0; i < n_seeds; ++i) {
    const uint64_t seed = seed0 + i;
    try {
      values.push_back(run(seed));
      seeds.push_back(seed);
    } catch (const std::exception& e) {
      failures += (failures.empty() ? "" : "; ") + std::to_string(seed) + ": " + e.what();
    }
  }
  if (!failures.empty()) throw DataError("runs failed for seeds " + failures);
  RunSummary s = summarize(std::move(values));
  s.seeds = std::move(seeds);
  return s;
}

}  // namespace mlm
