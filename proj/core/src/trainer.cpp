// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "mlm/error.hpp"
#include "mlm/rng.hpp"

namespace mlm {

namespace {

constexpr uint64_t kInitTag = 0x494E4954ULL;
constexpr uint64_t kDropoutTag = 0x44524F50ULL;
constexpr uint64_t kFinetuneShuffleTag = 0x46545348ULL;
constexpr uint64_t kHoldoutSeed = 0x484F4C44ULL;

}  // namespace

std::string task_name(Task task) {
  switch (task) {
    case Task::kPretrain: return "pretrain";
    case Task::kPos: return "pos";
    case Task::kNer: return "ner";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "pretrain") return Task::kPretrain;
  if (name == "pos") return Task::kPos;
  if (name == "ner") return Task::kNer;
  throw DataError("unknown task '" + std::string(name) + "' (expected pretrain, pos or ner)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw DataError("batch_size must be positive");
  if (log_every == 0) throw DataError("log_every must be positive");
  if (!(dev_fraction > 0 && dev_fraction < 1)) throw DataError("dev_fraction must lie in (0, 1)");
  if (!(warmup_ratio >= 0 && warmup_ratio <= 1)) throw DataError("warmup_ratio must lie in [0, 1]");
  if (!(schedule.peak_lr > 0)) throw DataError("peak learning rate must be positive");
  adam.validate();
  masking.validate();
}

std::string to_json_line(const StepLog& log) {
  nlohmann::ordered_json j = {{"step", log.step}, {"lr", log.lr}, {"loss", log.loss}};
  return j.dump();
}

std::vector<PackedSequence> prepare_pretraining(const Corpus& corpus, const Tokenizer& tok,
                                                size_t max_positions) {
  std::vector<std::vector<TokenId>> encoded;
  encoded.reserve(corpus.size());
  for (const auto& s : corpus.sentences) encoded.push_back(tok.encode(s, true));
  return pack_documents(encoded, corpus.document_ids, max_positions, tok.bos_id(), tok.eos_id(),
                        tok.pad_id());
}

PretrainResult pretrain(const TrainConfig& config, ModelConfig model, const Corpus& corpus,
                        const Tokenizer& tok, const PretrainOptions& options) {
  config.validate();
  if (corpus.empty()) throw DataError("pretraining corpus is empty");
  model.vocab_size = tok.size();
  model.num_labels = 0;
  model.validate();

  Schedule schedule = config.schedule;
  schedule.max_steps = config.max_steps;
  schedule.validate();

  const auto sequences = prepare_pretraining(corpus, tok, model.max_positions);
  const VocabInfo vocab = VocabInfo::from(tok);
  const size_t nb = batches_per_epoch(sequences.size(), config.batch_size);

  PretrainResult result;
  result.num_sequences = sequences.size();
  Checkpoint& ckpt = result.checkpoint;
  if (options.resume_from) {
    ckpt = *options.resume_from;
    if (ckpt.config != model) throw DataError("resume checkpoint config differs from run config");
    if (ckpt.seed != config.seed) throw DataError("resume checkpoint was trained with another seed");
    if (!ckpt.optim) throw DataError("resume checkpoint has no optimizer state");
  } else {
    ckpt.config = model;
    ckpt.task = task_name(Task::kPretrain);
    ckpt.seed = config.seed;
    ckpt.params = init_params<float>(model, mix_key({config.seed, kInitTag}));
    ckpt.optim = AdamState<float>::zeros_for(ckpt.params);
  }

  const uint64_t end = std::min(config.max_steps, options.stop_after.value_or(config.max_steps));
  if (ckpt.step >= end) return result;

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    const auto mode = options.resume_from ? std::ios::app : std::ios::trunc;
    log_file.open(options.out_dir / "pretrain_log.jsonl", std::ios::out | mode);
    if (!log_file) throw DataError("cannot write log in " + options.out_dir.string());
  }
  auto save = [&](bool numbered) {
    if (options.out_dir.empty()) return;
    save_checkpoint(ckpt, options.out_dir / "checkpoint.ckpt");
    if (numbered) {
      save_checkpoint(ckpt, options.out_dir / ("checkpoint-" + std::to_string(ckpt.step) + ".ckpt"));
    }
  };

  std::vector<MaskedBatch> batches;
  uint64_t cached_epoch = UINT64_MAX;
  for (uint64_t step = ckpt.step; step < end; ++step) {
    const uint64_t epoch = step / nb;
    if (epoch != cached_epoch) {
      batches = epoch_batches(sequences, config.batch_size, config.masking, vocab, epoch, config.seed);
      cached_epoch = epoch;
    }
    const MaskedBatch& batch = batches[step % nb];
    const BatchView view{batch.rows, batch.seq_len, batch.inputs, batch.attention_len};
    const double lr = schedule.lr_at(step + 1);

    const bool has_targets = std::any_of(batch.labels.begin(), batch.labels.end(),
                                         [](int32_t l) { return l != kIgnoreLabel; });
    StepLog entry{step + 1, lr, std::nan("")};
    if (has_targets) {
      ForwardCache<float> cache;
      const Matrix<float> logits = forward(ckpt.params, model, view, Mode::kTrain,
                                           mix_key({config.seed, kDropoutTag, step}), &cache);
      const LossResult<float> loss = mlm_loss(logits, batch.labels);
      Params<float> grads = backward(ckpt.params, model, cache, loss.d_logits);
      clip_grad_norm(grads, config.clip_norm);
      adam_step(ckpt.params, grads, *ckpt.optim, config.adam, lr);
      entry.loss = loss.loss;
    }
    ckpt.step = step + 1;

    if (ckpt.step % config.log_every == 0 || ckpt.step == end) {
      result.log.push_back(entry);
      if (log_file) log_file << to_json_line(entry) << '\n' << std::flush;
      if (options.on_log) options.on_log(entry);
    }
    if (config.checkpoint_every > 0 && ckpt.step % config.checkpoint_every == 0 && ckpt.step != end) {
      save(true);
    }
  }
  save(false);
  return result;
}

// ---------------------------------------------------------------------------
// Finetuning

namespace {


std::vector<AlignedChunk> build_chunks(const std::vector<TaggedSentence>& sentences,
                                       const std::vector<std::string>& labels,
                                       const Tokenizer& tok, size_t max_len, bool with_labels) {
  std::vector<AlignedChunk> out;
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    std::vector<std::string> words;
    std::vector<int32_t> ids;
    for (const auto& w : s) {
      words.push_back(w.word);
      if (with_labels) {
        auto it = std::lower_bound(labels.begin(), labels.end(), w.label);
        if (it == labels.end() || *it != w.label) throw DataError("label '" + w.label + "' not in inventory");
        ids.push_back(static_cast<int32_t>(it - labels.begin()));
      }
    }
    for (auto& c : align_labels(words, ids, tok, max_len)) out.push_back(std::move(c));
  }
  return out;
}

struct PaddedBatch {
  size_t rows = 0;
  size_t seq_len = 0;
  std::vector<TokenId> ids;
  std::vector<size_t> lengths;
  std::vector<int32_t> labels;

  BatchView view() const { return {rows, seq_len, ids, lengths}; }
};

PaddedBatch make_batch(const std::vector<AlignedChunk>& chunks, std::span<const size_t> members,
                       TokenId pad) {
  PaddedBatch b;
  b.rows = members.size();
  for (size_t i : members) b.seq_len = std::max(b.seq_len, chunks[i].ids.size());
  b.ids.assign(b.rows * b.seq_len, pad);
  b.labels.assign(b.rows * b.seq_len, kIgnoreLabel);
  for (size_t r = 0; r < members.size(); ++r) {
    const auto& c = chunks[members[r]];
    std::copy(c.ids.begin(), c.ids.end(), b.ids.begin() + static_cast<ptrdiff_t>(r * b.seq_len));
    std::copy(c.labels.begin(), c.labels.end(), b.labels.begin() + static_cast<ptrdiff_t>(r * b.seq_len));
    b.lengths.push_back(c.ids.size());
  }
  return b;
}

// Argmax label per position, one vector per chunk.
std::vector<std::vector<int32_t>> predict_chunks(const TaggerModel& model,
                                                 const std::vector<AlignedChunk>& chunks,
                                                 TokenId pad, size_t batch_size) {
  std::vector<std::vector<int32_t>> out(chunks.size());
  std::vector<size_t> members;
  for (size_t start = 0; start < chunks.size(); start += batch_size) {
    members.clear();
    for (size_t i = start; i < std::min(chunks.size(), start + batch_size); ++i) members.push_back(i);
    const PaddedBatch b = make_batch(chunks, members, pad);
    const Matrix<float> logits = tag_forward(model.params, model.config, b.view(), Mode::kEval, 0);
    for (size_t r = 0; r < b.rows; ++r) {
      auto& pred = out[members[r]];
      pred.resize(b.lengths[r]);
      for (size_t t = 0; t < b.lengths[r]; ++t) {
        const float* row = logits.row(r * b.seq_len + t);
        pred[t] = static_cast<int32_t>(std::max_element(row, row + logits.cols) - row);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> predict_tags(const TaggerModel& model, const Tokenizer& tok,
                                                   const std::vector<TaggedSentence>& sentences) {
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    std::vector<std::string> tags;
    if (!s.empty()) {
      const std::vector<TaggedSentence> one{s};
      const auto chunks = build_chunks(one, model.labels, tok, model.config.max_positions, false);
      const auto preds = predict_chunks(model, chunks, tok.pad_id(), 32);
      for (int32_t id : gather_word_predictions(chunks, preds)) tags.push_back(model.labels.at(id));
    }
    out.push_back(std::move(tags));
  }
  return out;
}

double evaluate_tagger(const TaggerModel& model, const Tokenizer& tok, const TagDataset& data,
                       Task task) {
  auto predicted = predict_tags(model, tok, data.sentences);
  std::vector<std::vector<std::string>> gold;
  for (const auto& s : data.sentences) {
    std::vector<std::string> tags;
    for (const auto& w : s) tags.push_back(w.label);
    gold.push_back(std::move(tags));
  }
  if (task == Task::kNer) {
    for (auto& p : predicted) repair_bio(p);
    return span_f1(predicted, gold);
  }
  std::vector<std::string> flat_pred, flat_gold;
  for (size_t i = 0; i < gold.size(); ++i) {
    flat_pred.insert(flat_pred.end(), predicted[i].begin(), predicted[i].end());
    flat_gold.insert(flat_gold.end(), gold[i].begin(), gold[i].end());
  }
  return accuracy(flat_pred, flat_gold);
}

std::pair<TagDataset, TagDataset> holdout_split(const TagDataset& data, double fraction) {
  const size_t n = data.sentences.size();
  auto held = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (n >= 2) held = std::clamp<size_t>(held, 1, n - 1);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(kHoldoutSeed);
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  TagDataset train, dev;
  for (size_t i = 0; i < n; ++i) {
    auto& target = i < n - held ? train : dev;
    target.sentences.push_back(data.sentences[order[i]]);
  }
  train.labels = dev.labels = data.labels;
  return {std::move(train), std::move(dev)};
}

Checkpoint to_checkpoint(const TaggerModel& model, Task task, uint64_t seed) {
  Checkpoint c;
  c.config = model.config;
  c.params = model.params;
  c.labels = model.labels;
  c.task = task_name(task);
  c.seed = seed;
  return c;
}

TaggerModel tagger_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config.num_labels == 0 || !ckpt.params.has_classifier()) {
    throw DataError("model not configured for tagging");
  }
  if (ckpt.labels.size() != ckpt.config.num_labels) {
    throw DataError("checkpoint label inventory does not match its classifier");
  }
  return {ckpt.config, ckpt.params, ckpt.labels};
}

FinetuneResult finetune(const Checkpoint& base, const Tokenizer& tok, const TagDataset& train_in,
                        const TagDataset* dev_in, const TrainConfig& config) {
  config.validate();
  if (base.config.vocab_size != tok.size()) {
    throw DataError("checkpoint vocabulary (" + std::to_string(base.config.vocab_size) +
                    ") does not match tokenizer (" + std::to_string(tok.size()) + ")");
  }
  const Task task = config.task == Task::kPretrain ? Task::kPos : config.task;

  TagDataset train, dev;
  if (dev_in != nullptr) {
    train = train_in;
    dev = *dev_in;
  } else {
    std::tie(train, dev) = holdout_split(train_in, config.dev_fraction);
  }

  std::vector<std::string> labels = train_in.labels;
  if (dev_in != nullptr) labels.insert(labels.end(), dev_in->labels.begin(), dev_in->labels.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.empty()) throw DataError("finetuning data has no labels");

  FinetuneResult result;
  TaggerModel& model = result.model;
  model.config = base.config;
  model.params = base.params;
  model.labels = labels;
  if (base.params.has_classifier()) {
    if (base.labels != labels || base.config.num_labels != labels.size()) {
      throw DataError("label inventory mismatch with the checkpoint's classifier head");
    }
  } else {
    attach_classifier(model.params, model.config, labels.size(), mix_key({config.seed, kInitTag}));
  }

  const auto chunks = build_chunks(train.sentences, labels, tok, model.config.max_positions, true);
  const size_t nb = chunks.empty() ? 0 : batches_per_epoch(chunks.size(), config.batch_size);
  result.total_steps = static_cast<uint64_t>(nb) * config.max_epochs;
  result.warmup_steps = warmup_from_ratio(config.warmup_ratio, result.total_steps);

  result.best_metric = evaluate_tagger(model, tok, dev, task);
  result.best_epoch = 0;
  if (result.total_steps == 0) return result;

  Schedule schedule;
  schedule.kind = ScheduleKind::kConstantAfterWarmup;
  schedule.peak_lr = config.schedule.peak_lr;
  schedule.warmup_steps = result.warmup_steps;
  schedule.max_steps = result.total_steps;
  schedule.validate();

  Params<float> params = model.params;
  AdamState<float> optim = AdamState<float>::zeros_for(params);
  TaggerModel current = model;
  uint64_t step = 0;
  std::vector<size_t> order(chunks.size());
  for (size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = Rng::for_key({kFinetuneShuffleTag, config.seed, epoch});
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (size_t b = 0; b < nb; ++b) {
      const size_t begin = b * config.batch_size;
      const size_t end = std::min(order.size(), begin + config.batch_size);
      const PaddedBatch batch = make_batch(
          chunks, std::span<const size_t>(order).subspan(begin, end - begin), tok.pad_id());
      ForwardCache<float> cache;
      const Matrix<float> logits = tag_forward(params, model.config, batch.view(), Mode::kTrain,
                                               mix_key({config.seed, kDropoutTag, step}), &cache);
      const LossResult<float> loss = masked_cross_entropy(logits, batch.labels);
      Params<float> grads = backward(params, model.config, cache, loss.d_logits);
      clip_grad_norm(grads, config.clip_norm);
      adam_step(params, grads, optim, config.adam, schedule.lr_at(step + 1));
      ++step;
    }

    current.params = params;
    const double metric = evaluate_tagger(current, tok, dev, task);
    result.epoch_metrics.push_back(metric);
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch + 1;
      model.params = params;
    }
  }
  return result;
}

}  // namespace mlm
