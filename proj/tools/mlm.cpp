// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

// mlm: command-line front end for tokenizer training, MLM pretraining and
// tagger finetuning. Exit codes: 0 ok, 1 usage, 2 data/config, 3 numeric.

#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mlm/config.hpp"
#include "mlm/error.hpp"
#include "mlm/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> max_steps;
  std::optional<size_t> max_epochs;
  std::optional<size_t> vocab_size;
  std::optional<std::string> task;
  std::optional<std::string> resume;
  std::optional<std::string> tokenizer;
  std::optional<std::string> checkpoint;
  std::optional<std::string> train;
  std::optional<std::string> dev;
  std::optional<size_t> runs;
  std::vector<std::string> inputs;
  std::optional<std::string> mode;
  std::optional<std::string> output;
  std::string text;
  std::string ids;
  size_t count = 0;
  bool strip = false;
  bool dedup = false;
  bool dump_batch = false;
};

mlm::RunConfig load_run_config(const Flags& f) {
  mlm::RunConfig rc;
  if (!f.config.empty()) rc = mlm::run_config_from(mlm::load_config(f.config));
  if (f.seed) rc.train.seed = *f.seed;
  if (f.out_dir) rc.out_dir = *f.out_dir;
  if (f.max_steps) rc.train.max_steps = *f.max_steps;
  if (f.max_epochs) rc.train.max_epochs = *f.max_epochs;
  if (f.vocab_size) rc.vocab_size = *f.vocab_size;
  if (f.task) rc.train.task = mlm::parse_task(*f.task);
  if (f.tokenizer) rc.tokenizer = *f.tokenizer;
  if (f.train) rc.train_data = *f.train;
  if (f.dev) rc.dev_data = *f.dev;
  if (f.runs) rc.runs = *f.runs;
  if (!f.inputs.empty()) rc.corpus.assign(f.inputs.begin(), f.inputs.end());
  if (f.mode) {
    if (*f.mode == "sentence") {
      rc.input_mode = mlm::InputMode::kSentencePerLine;
    } else if (*f.mode == "document") {
      rc.input_mode = mlm::InputMode::kDocumentPerLine;
    } else {
      throw mlm::DataError("--mode must be sentence or document");
    }
  }
  return rc;
}

mlm::SentenceSplitter splitter_for(const mlm::RunConfig& rc) {
  if (rc.abbreviations.empty()) return mlm::SentenceSplitter();
  mlm::require_paths({&rc.abbreviations});
  return mlm::SentenceSplitter::from_file(rc.abbreviations);
}

mlm::Corpus load_corpus(const mlm::RunConfig& rc) {
  if (rc.corpus.empty()) throw mlm::DataError("no corpus given (--input or data.corpus)");
  for (const auto& p : rc.corpus) mlm::require_paths({&p});
  return mlm::read_corpora(rc.corpus, rc.input_mode, splitter_for(rc));
}

mlm::TagDataset load_tagged(const fs::path& path, mlm::DataFormat format) {
  mlm::require_paths({&path});
  mlm::TagDataset d = format == mlm::DataFormat::kBio ? mlm::read_bio(path) : mlm::read_conllu(path);
  if (d.repairs > 0) {
    std::cerr << "warning: " << d.repairs << " BIO transition(s) repaired in " << path.string() << "\n";
  }
  return d;
}

void print_tokens(const mlm::Tokenizer& tok, const std::vector<mlm::TokenId>& ids) {
  std::string pieces, numbers;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) {
      pieces += ' ';
      numbers += ' ';
    }
    pieces += tok.token(ids[i]);
    numbers += std::to_string(ids[i]);
  }
  std::cout << pieces << "\n" << numbers << "\n";
}

int cmd_train_tokenizer(const Flags& f) {
  const mlm::RunConfig rc = load_run_config(f);
  const mlm::Corpus corpus = load_corpus(rc);
  const mlm::Tokenizer tok = mlm::Tokenizer::train(corpus, rc.vocab_size);
  fs::path out = f.output ? fs::path(*f.output) : rc.tokenizer;
  if (out.empty()) out = rc.out_dir / "tokenizer.vocab";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  tok.save(out);
  std::cout << nlohmann::ordered_json{{"tokenizer", out.string()}, {"vocab_size", tok.size()},
                              {"sentences", corpus.size()}}
                   .dump()
            << "\n";
  return 0;
}

mlm::Tokenizer load_tokenizer(const fs::path& path) {
  if (path.empty()) throw mlm::DataError("no tokenizer given (--model/--tokenizer or tokenizer.path)");
  mlm::require_paths({&path});
  return mlm::Tokenizer::load(path);
}

int cmd_encode(const Flags& f) {
  const mlm::Tokenizer tok = load_tokenizer(f.tokenizer.value_or(""));
  if (!f.text.empty()) {
    print_tokens(tok, tok.encode(f.text, false));
    return 0;
  }
  std::string line;
  while (std::getline(std::cin, line)) print_tokens(tok, tok.encode(line, false));
  return 0;
}

int cmd_decode(const Flags& f) {
  const mlm::Tokenizer tok = load_tokenizer(f.tokenizer.value_or(""));
  auto decode_line = [&](const std::string& s) {
    std::istringstream in(s);
    std::vector<mlm::TokenId> ids;
    std::string word;
    while (in >> word) {
      try {
        const unsigned long v = std::stoul(word);
        if (v > UINT32_MAX) throw std::out_of_range(word);
        ids.push_back(static_cast<mlm::TokenId>(v));
      } catch (const std::logic_error&) {
        throw mlm::DataError("not a token id: '" + word + "'");
      }
    }
    std::cout << tok.decode(ids, f.strip) << "\n";
  };
  if (!f.ids.empty()) {
    decode_line(f.ids);
    return 0;
  }
  std::string line;
  while (std::getline(std::cin, line)) decode_line(line);
  return 0;
}

int cmd_sample_corpus(const Flags& f) {
  const mlm::RunConfig rc = load_run_config(f);
  mlm::Corpus corpus = load_corpus(rc);
  if (f.dedup) corpus = mlm::dedup(corpus);
  const size_t count = f.count == 0 ? corpus.size() : f.count;
  const mlm::Corpus sample = mlm::sample_sentences(corpus, count, rc.train.seed);
  if (f.output) {
    mlm::write_corpus(sample, *f.output);
  } else {
    for (const auto& s : sample.sentences) std::cout << s << "\n";
  }
  return 0;
}

int cmd_pretrain(const Flags& f) {
  const mlm::RunConfig rc = load_run_config(f);
  const mlm::Corpus corpus = load_corpus(rc);
  fs::create_directories(rc.out_dir);

  const fs::path local = rc.out_dir / "tokenizer.vocab";
  auto obtain_tokenizer = [&] {
    if (!rc.tokenizer.empty()) return load_tokenizer(rc.tokenizer);
    if (fs::exists(local)) return mlm::Tokenizer::load(local);
    mlm::Tokenizer trained = mlm::Tokenizer::train(corpus, rc.vocab_size);
    trained.save(local);
    std::cerr << "trained tokenizer with " << trained.size() << " entries -> " << local.string() << "\n";
    return trained;
  };
  const mlm::Tokenizer tok = obtain_tokenizer();

  if (f.dump_batch) {
    const auto seqs = mlm::prepare_pretraining(corpus, tok, rc.model.max_positions);
    const auto batches = mlm::epoch_batches(seqs, rc.train.batch_size, rc.train.masking,
                                            mlm::VocabInfo::from(tok), 0, rc.train.seed);
    if (!batches.empty()) std::cout << mlm::describe_batch(batches.front(), tok);
    return 0;
  }

  mlm::PretrainOptions options;
  options.out_dir = rc.out_dir;
  if (f.resume) {
    const fs::path p = *f.resume;
    mlm::require_paths({&p});
    options.resume_from = mlm::load_checkpoint(p);
  }
  options.on_log = [](const mlm::StepLog& log) { std::cout << mlm::to_json_line(log) << "\n"; };
  const mlm::PretrainResult result = mlm::pretrain(rc.train, rc.model, corpus, tok, options);
  std::cerr << "packed " << result.num_sequences << " sequences; step " << result.checkpoint.step
            << " -> " << (rc.out_dir / "checkpoint.ckpt").string() << "\n";
  return 0;
}

fs::path tokenizer_next_to(const mlm::RunConfig& rc, const fs::path& checkpoint) {
  if (!rc.tokenizer.empty()) return rc.tokenizer;
  return checkpoint.parent_path() / "tokenizer.vocab";
}

std::string metric_line(mlm::Task task, uint64_t seed, double metric) {
  return nlohmann::ordered_json{{"task", mlm::task_name(task)}, {"seed", seed}, {"metric", metric}}.dump();
}

int cmd_finetune(const Flags& f) {
  mlm::RunConfig rc = load_run_config(f);
  if (rc.train.task == mlm::Task::kPretrain) throw mlm::DataError("finetune needs --task pos or ner");
  const fs::path ckpt_path = f.checkpoint ? fs::path(*f.checkpoint) : rc.out_dir / "checkpoint.ckpt";
  mlm::require_paths({&ckpt_path});
  const mlm::Checkpoint base = mlm::load_checkpoint(ckpt_path);
  const mlm::Tokenizer tok = load_tokenizer(tokenizer_next_to(rc, ckpt_path));
  if (rc.train_data.empty()) throw mlm::DataError("no training data (--train or data.train)");
  const mlm::DataFormat format = rc.format_for_task();
  const mlm::TagDataset train = load_tagged(rc.train_data, format);
  std::optional<mlm::TagDataset> dev;
  if (!rc.dev_data.empty()) dev = load_tagged(rc.dev_data, format);
  std::optional<mlm::TagDataset> test;
  if (!rc.test_data.empty()) test = load_tagged(rc.test_data, format);
  fs::create_directories(rc.out_dir);

  const mlm::Task task = rc.train.task;
  auto run_one = [&](uint64_t seed) {
    mlm::TrainConfig cfg = rc.train;
    cfg.seed = seed;
    const mlm::FinetuneResult r = mlm::finetune(base, tok, train, dev ? &*dev : nullptr, cfg);
    const double metric = test ? mlm::evaluate_tagger(r.model, tok, *test, task) : r.best_metric;
    const std::string name = mlm::task_name(task) + (rc.runs > 1 ? "-seed" + std::to_string(seed) : "") + ".ckpt";
    mlm::save_checkpoint(mlm::to_checkpoint(r.model, task, seed), rc.out_dir / name);
    std::cerr << "seed " << seed << ": best epoch " << r.best_epoch << " of " << cfg.max_epochs
              << ", warmup " << r.warmup_steps << "/" << r.total_steps << " steps\n";
    std::cout << metric_line(task, seed, metric) << "\n";
    return metric;
  };

  if (rc.runs <= 1) {
    run_one(rc.train.seed);
    return 0;
  }
  mlm::RunSummary summary = mlm::multi_run(rc.runs, rc.train.seed, run_one);
  summary.task = mlm::task_name(task);
  std::cout << nlohmann::ordered_json{{"task", summary.task}, {"seeds", summary.seeds}, {"values", summary.values},
                              {"mean", summary.mean}, {"std", summary.stddev},
                              {"summary", summary.format()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_evaluate(const Flags& f) {
  const mlm::RunConfig rc = load_run_config(f);
  if (!f.checkpoint) throw mlm::DataError("evaluate needs --checkpoint");
  const fs::path ckpt_path = *f.checkpoint;
  mlm::require_paths({&ckpt_path});
  const mlm::Checkpoint ckpt = mlm::load_checkpoint(ckpt_path);
  const mlm::TaggerModel model = mlm::tagger_from_checkpoint(ckpt);
  const mlm::Task task = f.task ? rc.train.task : mlm::parse_task(ckpt.task);
  if (task == mlm::Task::kPretrain) throw mlm::DataError("checkpoint is not a tagging model");
  const mlm::Tokenizer tok = load_tokenizer(tokenizer_next_to(rc, ckpt_path));
  fs::path data_path = !f.inputs.empty() ? fs::path(f.inputs.front()) : rc.test_data;
  if (data_path.empty()) data_path = rc.dev_data;
  if (data_path.empty()) throw mlm::DataError("no evaluation data (--input or data.test)");
  mlm::RunConfig probe = rc;
  probe.train.task = task;
  const mlm::TagDataset data = load_tagged(data_path, probe.format_for_task());
  std::cout << metric_line(task, ckpt.seed, mlm::evaluate_tagger(model, tok, data, task)) << "\n";
  return 0;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Config file (TOML subset)");
  cmd->add_option("--seed", f.seed, "Seed for every random draw");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-language-model pretraining and tagger finetuning"};
  app.require_subcommand(1);
  Flags f;

  auto* tt = app.add_subcommand("train-tokenizer", "Learn a BPE vocabulary from a corpus");
  add_common(tt, f);
  tt->add_option("--input", f.inputs, "Corpus files (plain or gzip)");
  tt->add_option("--mode", f.mode, "sentence | document");
  tt->add_option("--vocab-size", f.vocab_size, "Vocabulary size");
  tt->add_option("--output", f.output, "Where to write the tokenizer");

  auto* enc = app.add_subcommand("encode", "Print the tokens and ids of a text");
  enc->add_option("--model", f.tokenizer, "Tokenizer file")->required();
  enc->add_option("--text", f.text, "Text to encode (stdin lines otherwise)");

  auto* dec = app.add_subcommand("decode", "Turn ids back into text");
  dec->add_option("--model", f.tokenizer, "Tokenizer file")->required();
  dec->add_option("--ids", f.ids, "Space-separated ids (stdin lines otherwise)");
  dec->add_flag("--strip-specials", f.strip, "Drop [BOS], [EOS] and [PAD]");

  auto* pre = app.add_subcommand("pretrain", "MLM pretraining");
  add_common(pre, f);
  pre->add_option("--input", f.inputs, "Corpus files");
  pre->add_option("--mode", f.mode, "sentence | document");
  pre->add_option("--max-steps", f.max_steps, "Optimizer steps");
  pre->add_option("--vocab-size", f.vocab_size, "Vocabulary size when a tokenizer is trained");
  pre->add_option("--tokenizer", f.tokenizer, "Existing tokenizer file");
  pre->add_option("--resume", f.resume, "Checkpoint to continue from");
  pre->add_flag("--dump-batch", f.dump_batch, "Print the first masked batch and exit");

  auto* fin = app.add_subcommand("finetune", "Train a POS or NER tagger on a pretrained checkpoint");
  add_common(fin, f);
  fin->add_option("--task", f.task, "pos | ner")->check(CLI::IsMember({"pos", "ner"}));
  fin->add_option("--checkpoint", f.checkpoint, "Pretrained checkpoint");
  fin->add_option("--tokenizer", f.tokenizer, "Tokenizer file");
  fin->add_option("--train", f.train, "Training data (CoNLL-U or BIO)");
  fin->add_option("--dev", f.dev, "Dev data; 10% of train is held out otherwise");
  fin->add_option("--max-epochs", f.max_epochs, "Epochs");
  fin->add_option("--runs", f.runs, "Number of seeds (mean ± std when >= 2)");

  auto* ev = app.add_subcommand("evaluate", "Score a finetuned tagger");
  add_common(ev, f);
  ev->add_option("--task", f.task, "pos | ner")->check(CLI::IsMember({"pos", "ner"}));
  ev->add_option("--checkpoint", f.checkpoint, "Finetuned checkpoint")->required();
  ev->add_option("--tokenizer", f.tokenizer, "Tokenizer file");
  ev->add_option("--input", f.inputs, "Labelled data");

  auto* smp = app.add_subcommand("sample-corpus", "Draw sentences without replacement");
  add_common(smp, f);
  smp->add_option("--input", f.inputs, "Corpus files");
  smp->add_option("--mode", f.mode, "sentence | document");
  smp->add_option("--count", f.count, "Sentences to draw (default: all, shuffled)");
  smp->add_option("--output", f.output, "Output file (stdout otherwise)");
  smp->add_flag("--dedup", f.dedup, "Drop exact duplicate sentences first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return 1;
  }

  try {
    if (*tt) return cmd_train_tokenizer(f);
    if (*enc) return cmd_encode(f);
    if (*dec) return cmd_decode(f);
    if (*pre) return cmd_pretrain(f);
    if (*fin) return cmd_finetune(f);
    if (*ev) return cmd_evaluate(f);
    if (*smp) return cmd_sample_corpus(f);
  } catch (const mlm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const mlm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
