// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "mlm/error.hpp"
#include "mlm/metrics.hpp"
#include "mlm/rng.hpp"
#include "mlm/tagging.hpp"
#include "oracles.hpp"

namespace mlm {
namespace {

using Tags = std::vector<std::string>;

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(Tags{"A", "B"}, Tags{"A", "B"}), 100.0);
  EXPECT_EQ(accuracy(Tags{"A", "B"}, Tags{"B", "A"}), 0.0);
  EXPECT_EQ(accuracy(Tags{"A", "B", "C", "D"}, Tags{"A", "B", "C", "X"}), 75.0);
  EXPECT_THROW(accuracy(Tags{"A"}, Tags{"A", "B"}), DataError);
}

TEST(Entities, Decode) {
  const auto e = decode_entities(Tags{"B-PER", "I-PER", "O", "I-LOC", "B-LOC", "I-ORG"});
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0].type, "PER");
  EXPECT_EQ(e[0].start, 0u);
  EXPECT_EQ(e[0].end, 1u);  // inclusive
  EXPECT_EQ(e[1].start, 3u);
  EXPECT_EQ(e[3].type, "ORG");
}

TEST(SpanF1, Examples) {
  const std::vector<Tags> gold{{"O", "B-PER", "I-PER", "I-PER", "O"}};
  EXPECT_EQ(span_f1(gold, gold), 100.0);
  const std::vector<Tags> split{{"O", "B-PER", "I-PER", "B-PER", "O"}};
  EXPECT_EQ(span_f1(split, gold), 0.0);
  const std::vector<Tags> none{{"O", "O"}};
  EXPECT_EQ(span_f1(none, none), 100.0);
  EXPECT_EQ(span_f1(none, std::vector<Tags>{{"B-LOC", "O"}}), 0.0);
  EXPECT_EQ(span_f1(std::vector<Tags>{{"B-LOC", "O"}}, none), 0.0);
  // One of two gold entities found, no false positives: P=1, R=0.5.
  EXPECT_NEAR(span_f1(std::vector<Tags>{{"B-LOC", "O", "O"}}, std::vector<Tags>{{"B-LOC", "O", "B-PER"}}),
              100.0 * 2 * 0.5 / 1.5, 1e-12);
  EXPECT_THROW(span_f1(std::vector<Tags>{{"O"}}, std::vector<Tags>{{"O", "O"}}), DataError);
}

TEST(SpanF1, MatchesOracle) {
  Rng rng(8);
  const char* types[] = {"A", "B"};
  auto random_tags = [&](size_t n) {
    Tags t;
    for (size_t i = 0; i < n; ++i) {
      const uint64_t k = rng.below(3);
      t.push_back(k == 0 ? "O" : std::string(k == 1 ? "B-" : "I-") + types[rng.below(2)]);
    }
    repair_bio(t);
    return t;
  };
  for (int i = 0; i < 1000; ++i) {
    std::vector<Tags> p, g;
    for (uint64_t s = 0, n = 1 + rng.below(3); s < n; ++s) {
      const size_t len = rng.below(21);
      g.push_back(random_tags(len));
      p.push_back(rng.below(4) == 0 ? g.back() : random_tags(len));
    }
    ASSERT_NEAR(span_f1(p, g), oracle::span_f1(p, g), 1e-9);
  }
}

TEST(Summary, FiveRuns) {
  const RunSummary s = summarize({90, 92, 94, 91, 93});
  EXPECT_DOUBLE_EQ(s.mean, 92.0);
  EXPECT_NEAR(s.stddev, 1.5811388300841898, 1e-12);
  EXPECT_EQ(s.format(), "92.0 ± 1.58");
}

TEST(Summary, TwoRunsAndIdentical) {
  const RunSummary s = summarize({0, 100});
  EXPECT_DOUBLE_EQ(s.mean, 50.0);
  EXPECT_NEAR(s.stddev, 70.71067811865476, 1e-12);
  EXPECT_EQ(summarize({91.5, 91.5, 91.5}).stddev, 0.0);
}

TEST(Summary, Formatting) {
  EXPECT_EQ(format_mean_std(91.942, 0.13), "91.942 ± 0.13");
  EXPECT_EQ(format_mean_std(93.4052, 0.164), "93.4052 ± 0.16");
  EXPECT_EQ(format_mean_std(50, 70.7107), "50.0 ± 70.71");
  EXPECT_EQ(format_mean_std(93.40523, 0.1), "93.4052 ± 0.10");
}

TEST(MultiRun, SeedsAndFailures) {
  std::vector<uint64_t> seen;
  const RunSummary s = multi_run(3, 10, [&](uint64_t seed) {
    seen.push_back(seed);
    return static_cast<double>(seed);
  });
  EXPECT_EQ(seen, (std::vector<uint64_t>{10, 11, 12}));
  EXPECT_EQ(s.seeds, seen);
  EXPECT_DOUBLE_EQ(s.mean, 11.0);
  EXPECT_THROW(multi_run(1, 0, [](uint64_t) { return 1.0; }), DataError);
  try {
    multi_run(4, 0, [](uint64_t seed) -> double {
      if (seed % 2 == 1) throw NumericError("boom");
      return 1.0;
    });
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

}  // namespace
}  // namespace mlm
