// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlm/checkpoint.hpp"
#include "mlm/corpus.hpp"
#include "mlm/databatch.hpp"
#include "mlm/metrics.hpp"
#include "mlm/model.hpp"
#include "mlm/optim.hpp"
#include "mlm/tagging.hpp"
#include "mlm/tokenizer.hpp"

namespace mlm {

enum class Task { kPretrain, kPos, kNer };

std::string task_name(Task task);
Task parse_task(std::string_view name);

struct TrainConfig {
  Task task = Task::kPretrain;
  size_t batch_size = 256;
  // Pretraining length in optimizer steps; also the schedule's end.
  uint64_t max_steps = 600000;
  // Finetuning length in epochs.
  size_t max_epochs = 10;
  // kind, warmup_steps and peak_lr are used for pretraining; finetuning
  // derives warmup_steps from warmup_ratio and always holds the peak.
  Schedule schedule;
  double warmup_ratio = 0.1;
  AdamHyper adam;
  uint64_t seed = 0;
  // 0 writes a checkpoint only at the end.
  uint64_t checkpoint_every = 0;
  uint64_t log_every = 1;
  MaskingConfig masking;
  double clip_norm = 0.0;
  // Held-out share when no dev set is supplied.
  double dev_fraction = 0.1;

  void validate() const;
};

struct StepLog {
  uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

std::string to_json_line(const StepLog& log);

struct PretrainOptions {
  // Where checkpoint.ckpt, checkpoint-<step>.ckpt and pretrain_log.jsonl go.
  // Empty keeps everything in memory.
  std::filesystem::path out_dir;
  std::optional<Checkpoint> resume_from;
  // Stop after this step even if max_steps is later; used to build partial
  // runs for resume tests. The schedule still uses max_steps.
  std::optional<uint64_t> stop_after;
  std::function<void(const StepLog&)> on_log;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
  size_t num_sequences = 0;
};

// Tokenizes every sentence with [BOS]/[EOS] and packs them into rows of
// max_positions tokens, respecting document boundaries.
std::vector<PackedSequence> prepare_pretraining(const Corpus& corpus, const Tokenizer& tok,
                                                size_t max_positions);

// MLM pretraining: epoch_batches -> forward -> mlm_loss -> backward ->
// (clip) -> adam_step for every step up to max_steps. Step s uses the
// learning rate lr_at(s + 1), epoch s / batches_per_epoch and a dropout seed
// derived from (seed, s), so resuming from a checkpoint replays the
// uninterrupted run exactly. The model's vocab_size is taken from tok.
PretrainResult pretrain(const TrainConfig& config, ModelConfig model, const Corpus& corpus,
                        const Tokenizer& tok, const PretrainOptions& options = {});

struct TaggerModel {
  ModelConfig config;
  Params<float> params;
  std::vector<std::string> labels;
};

struct FinetuneResult {
  TaggerModel model;       // parameters of the best epoch
  double best_metric = 0;  // accuracy (pos) or entity F1 (ner), percent
  size_t best_epoch = 0;   // 0 means the untrained head was best
  std::vector<double> epoch_metrics;  // one per trained epoch
  uint64_t total_steps = 0;
  uint64_t warmup_steps = 0;
};

// Attaches a classifier over the label inventory of train (and dev) to the
// pretrained weights and trains for max_epochs with the constant-after-warmup
// schedule. Without a dev set, a fixed dev_fraction of train is held out.
// The returned model is the one with the best dev metric.
FinetuneResult finetune(const Checkpoint& base, const Tokenizer& tok, const TagDataset& train,
                        const TagDataset* dev, const TrainConfig& config);

std::vector<std::vector<std::string>> predict_tags(const TaggerModel& model, const Tokenizer& tok,
                                                   const std::vector<TaggedSentence>& sentences);

// Word accuracy for pos, entity F1 (after BIO repair of predictions) for ner.
double evaluate_tagger(const TaggerModel& model, const Tokenizer& tok, const TagDataset& data,
                       Task task);

Checkpoint to_checkpoint(const TaggerModel& model, Task task, uint64_t seed);
TaggerModel tagger_from_checkpoint(const Checkpoint& ckpt);

// Splits off a held-out share with a fixed shuffle so every seed of a
// multi-seed study sees the same split.
std::pair<TagDataset, TagDataset> holdout_split(const TagDataset& data, double fraction);

}  // namespace mlm
