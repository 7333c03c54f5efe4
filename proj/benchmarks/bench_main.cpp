// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <numeric>

#include "mlm/corpus.hpp"
#include "mlm/databatch.hpp"
#include "mlm/model.hpp"
#include "mlm/optim.hpp"
#include "mlm/rng.hpp"
#include "mlm/tokenizer.hpp"

namespace {

const mlm::Corpus& corpus() {
  static const mlm::Corpus c =
      mlm::read_corpus(std::string(MLM_TEST_DATA_DIR) + "/tr_32.txt", mlm::InputMode::kSentencePerLine);
  return c;
}

void BM_TrainBpe(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlm::Tokenizer::train(corpus(), static_cast<size_t>(state.range(0))));
  }
}
BENCHMARK(BM_TrainBpe)->Arg(150)->Arg(300);

void BM_Encode(benchmark::State& state) {
  const mlm::Tokenizer tok = mlm::Tokenizer::train(corpus(), 300);
  size_t bytes = 0;
  for (auto _ : state) {
    for (const auto& s : corpus().sentences) {
      benchmark::DoNotOptimize(tok.encode(s, true));
      bytes += s.size();
    }
  }
  state.SetBytesProcessed(static_cast<int64_t>(bytes));
}
BENCHMARK(BM_Encode);

mlm::ModelConfig desk_model() {
  mlm::ModelConfig m;  // defaults are the desk shape
  m.vocab_size = 300;
  return m;
}

struct Batch {
  std::vector<mlm::TokenId> ids;
  std::vector<size_t> lengths;
  std::vector<int32_t> labels;
  mlm::BatchView view(size_t rows, size_t len) const { return {rows, len, ids, lengths}; }
};

Batch random_batch(size_t rows, size_t len, size_t vocab) {
  mlm::Rng rng(1);
  Batch b;
  for (size_t i = 0; i < rows * len; ++i) {
    b.ids.push_back(static_cast<mlm::TokenId>(5 + rng.below(vocab - 5)));
    b.labels.push_back(rng.below(7) == 0 ? static_cast<int32_t>(b.ids.back()) : mlm::kIgnoreLabel);
  }
  b.lengths.assign(rows, len);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const mlm::ModelConfig cfg = desk_model();
  const auto params = mlm::init_params<float>(cfg, 1);
  const size_t rows = static_cast<size_t>(state.range(0));
  const Batch b = random_batch(rows, cfg.max_positions, cfg.vocab_size);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlm::forward(params, cfg, b.view(rows, cfg.max_positions), mlm::Mode::kEval, 0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * cfg.max_positions));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const mlm::ModelConfig cfg = desk_model();
  const auto params = mlm::init_params<float>(cfg, 1);
  const size_t rows = static_cast<size_t>(state.range(0));
  const Batch b = random_batch(rows, cfg.max_positions, cfg.vocab_size);
  for (auto _ : state) {
    mlm::ForwardCache<float> cache;
    const auto logits =
        mlm::forward(params, cfg, b.view(rows, cfg.max_positions), mlm::Mode::kTrain, 7, &cache);
    const auto loss = mlm::mlm_loss(logits, b.labels);
    benchmark::DoNotOptimize(mlm::backward(params, cfg, cache, loss.d_logits));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * cfg.max_positions));
}
BENCHMARK(BM_ForwardBackward)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const mlm::ModelConfig cfg = desk_model();
  auto params = mlm::init_params<float>(cfg, 1);
  const auto grads = mlm::init_params<float>(cfg, 2);
  auto adam = mlm::AdamState<float>::zeros_for(params);
  for (auto _ : state) mlm::adam_step(params, grads, adam, mlm::AdamHyper{}, 1e-4);
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
