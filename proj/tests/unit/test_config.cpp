// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mlm/config.hpp"
#include "mlm/error.hpp"

namespace mlm {
namespace {

const std::filesystem::path kConfigs = MLM_CONFIG_DIR;

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

TEST(ConfigParse, Values) {
  const ConfigTree t = parse_config(
      "# top\n[a]\nn = 1_000\nx = 2.5e-5  # trailing\ns = \"p # q\"\nb = false\n"
      "l = [\"x\", \"y\"]\n\n[b]\nn = -3\n");
  EXPECT_EQ(std::get<int64_t>(t.values.at("a.n")), 1000);
  EXPECT_EQ(std::get<double>(t.values.at("a.x")), 2.5e-5);
  EXPECT_EQ(std::get<std::string>(t.values.at("a.s")), "p # q");
  EXPECT_EQ(std::get<bool>(t.values.at("a.b")), false);
  EXPECT_EQ(std::get<std::vector<std::string>>(t.values.at("a.l")), (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(std::get<int64_t>(t.values.at("b.n")), -3);
}

TEST(ConfigParse, ErrorsNameTheLine) {
  EXPECT_NE(error_of([] { parse_config("[a]\nx = 1\nx = 2\n", "f.toml"); }).find("f.toml:3"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_config("x = 1\n", "f.toml"); }).find("f.toml:1"), std::string::npos);
  EXPECT_THROW(parse_config("[a]\nx = 1e--5\n"), DataError);
  EXPECT_THROW(parse_config("[a]\nx = \"open\n"), DataError);
  EXPECT_THROW(parse_config("[a\n"), DataError);
  EXPECT_THROW(parse_config("[a]\njunk\n"), DataError);
}

TEST(ConfigParse, MissingFileNamesPath) {
  const std::string msg = error_of([] { load_config("/nonexistent/x.toml"); });
  EXPECT_NE(msg.find("/nonexistent/x.toml"), std::string::npos) << msg;
}

TEST(RunConfig, UnknownKeyAndBadType) {
  EXPECT_NE(error_of([] { run_config_from(parse_config("[model]\nlayerz = 2\n")); }).find("model.layerz"),
            std::string::npos);
  EXPECT_THROW(run_config_from(parse_config("[model]\nlayers = \"two\"\n")), DataError);
  EXPECT_THROW(run_config_from(parse_config("[model]\nlayers = -1\n")), DataError);
  EXPECT_THROW(run_config_from(parse_config("[schedule]\nkind = \"cosine\"\n")), DataError);
  EXPECT_THROW(run_config_from(parse_config("[train]\ntask = \"qa\"\n")), DataError);
}

TEST(RunConfig, PathsResolveAgainstConfigDir) {
  ConfigTree t = parse_config("[data]\ncorpus = \"c.txt\"\ntrain = \"/abs/t.conllu\"\n[run]\nout_dir = \"o\"\n");
  t.base_dir = "/etc/mlm";
  const RunConfig rc = run_config_from(t);
  EXPECT_EQ(rc.corpus, (std::vector<std::filesystem::path>{"/etc/mlm/c.txt"}));
  EXPECT_EQ(rc.train_data, "/abs/t.conllu");
  EXPECT_EQ(rc.out_dir, "o");
}

TEST(RunConfig, ShippedDesk) {
  const RunConfig rc = run_config_from(load_config(kConfigs / "desk.toml"));
  EXPECT_EQ(rc.model.num_layers, 2u);
  EXPECT_EQ(rc.model.hidden(), 64u);
  EXPECT_EQ(rc.vocab_size, 300u);
  EXPECT_EQ(rc.train.schedule.kind, ScheduleKind::kLinearDecay);
  ASSERT_EQ(rc.corpus.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(rc.corpus[0]));
  EXPECT_TRUE(std::filesystem::exists(rc.abbreviations));
  rc.train.validate();
  rc.model.validate();
}

TEST(RunConfig, ShippedPretrain) {
  const RunConfig rc = run_config_from(load_config(kConfigs / "pretrain.toml"));
  EXPECT_EQ(rc.model.hidden(), 768u);
  EXPECT_EQ(rc.model.ffn_size, 3072u);
  EXPECT_EQ(rc.vocab_size, 50000u);
  EXPECT_EQ(rc.train.batch_size, 256u);
  EXPECT_EQ(rc.train.max_steps, 600000u);
  EXPECT_EQ(rc.train.schedule.warmup_steps, 10000u);
  EXPECT_EQ(rc.train.schedule.peak_lr, 1e-5);
  EXPECT_EQ(rc.train.adam.beta2, 0.98);
  EXPECT_EQ(rc.input_mode, InputMode::kDocumentPerLine);
}

TEST(RunConfig, ShippedFinetuneProfiles) {
  struct Want {
    const char* file;
    Task task;
    double lr, wd, warmup;
  };
  for (const Want& w : {Want{"boun.toml", Task::kPos, 5e-5, 0.06, 0.1},
                        Want{"imst.toml", Task::kPos, 1e-5, 0.06, 0.06},
                        Want{"xtreme.toml", Task::kNer, 1e-5, 0.1, 0.1}}) {
    SCOPED_TRACE(w.file);
    const RunConfig rc = run_config_from(load_config(kConfigs / w.file));
    EXPECT_EQ(rc.train.task, w.task);
    EXPECT_EQ(rc.train.schedule.peak_lr, w.lr);
    EXPECT_EQ(rc.train.adam.weight_decay, w.wd);
    EXPECT_EQ(rc.train.warmup_ratio, w.warmup);
    EXPECT_EQ(rc.train.batch_size, 16u);
    EXPECT_EQ(rc.train.max_epochs, 10u);
    EXPECT_EQ(rc.train.schedule.kind, ScheduleKind::kConstantAfterWarmup);
    EXPECT_EQ(rc.runs, 5u);
    EXPECT_EQ(rc.format_for_task(), w.task == Task::kNer ? DataFormat::kBio : DataFormat::kConllu);
  }
}

}  // namespace
}  // namespace mlm
