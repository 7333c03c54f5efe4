// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mlm/error.hpp"

namespace mlm {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "MLMCKPT1";

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(std::string_view in, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_floats(std::string& out, const Matrix<float>& m) {
  for (float f : m.data) put_u32(out, std::bit_cast<uint32_t>(f));
}

json config_to_json(const ModelConfig& c) {
  return {{"num_layers", c.num_layers},       {"num_heads", c.num_heads},
          {"head_size", c.head_size},         {"ffn_size", c.ffn_size},
          {"vocab_size", c.vocab_size},       {"max_positions", c.max_positions},
          {"dropout", c.dropout},             {"attn_dropout", c.attn_dropout},
          {"num_labels", c.num_labels}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.num_layers = j.at("num_layers").get<size_t>();
  c.num_heads = j.at("num_heads").get<size_t>();
  c.head_size = j.at("head_size").get<size_t>();
  c.ffn_size = j.at("ffn_size").get<size_t>();
  c.vocab_size = j.at("vocab_size").get<size_t>();
  c.max_positions = j.at("max_positions").get<size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.attn_dropout = j.at("attn_dropout").get<double>();
  c.num_labels = j.at("num_labels").get<size_t>();
  c.validate();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json dir = json::array();
  auto refs = ckpt.params.refs();
  for (const auto& r : refs) {
    dir.push_back({{"name", r.name}, {"rows", r.tensor->rows}, {"cols", r.tensor->cols}});
  }
  if (ckpt.optim) {
    if (ckpt.optim->m.size() != refs.size() || ckpt.optim->v.size() != refs.size()) {
      throw DataError("optimizer state does not match parameters");
    }
    for (const char* kind : {"m", "v"}) {
      for (const auto& r : refs) {
        dir.push_back({{"name", std::string("adam.") + kind + "." + r.name},
                       {"rows", r.tensor->rows},
                       {"cols", r.tensor->cols}});
      }
    }
  }
  json header = {{"format_version", kCheckpointVersion},
                 {"config", config_to_json(ckpt.config)},
                 {"step", ckpt.step},
                 {"task", ckpt.task},
                 {"labels", ckpt.labels},
                 {"seed", ckpt.seed},
                 {"adam_step", ckpt.optim ? json(ckpt.optim->step) : json(nullptr)},
                 {"tensors", dir}};
  const std::string header_text = header.dump();

  std::string out(kMagic);
  put_u32(out, static_cast<uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& r : refs) put_floats(out, *r.tensor);
  if (ckpt.optim) {
    for (const auto& m : ckpt.optim->m) put_floats(out, m);
    for (const auto& v : ckpt.optim->v) put_floats(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const uint32_t header_len = get_u32(bytes, kMagic.size());
  size_t pos = kMagic.size() + 4;
  if (bytes.size() < pos + header_len) throw DataError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    if (header.at("format_version").get<uint32_t>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version");
    }
    ckpt.config = config_from_json(header.at("config"));
    ckpt.step = header.at("step").get<uint64_t>();
    ckpt.task = header.at("task").get<std::string>();
    ckpt.labels = header.at("labels").get<std::vector<std::string>>();
    ckpt.seed = header.at("seed").get<uint64_t>();
    ckpt.params = zero_params<float>(ckpt.config);
    const auto& adam_step = header.at("adam_step");
    if (!adam_step.is_null()) {
      ckpt.optim = AdamState<float>::zeros_for(ckpt.params);
      ckpt.optim->step = adam_step.get<uint64_t>();
    }

    std::vector<Matrix<float>*> targets;
    std::vector<std::string> names;
    for (auto& r : ckpt.params.refs()) {
      targets.push_back(r.tensor);
      names.push_back(r.name);
    }
    if (ckpt.optim) {
      const size_t n = names.size();
      for (size_t i = 0; i < n; ++i) {
        targets.push_back(&ckpt.optim->m[i]);
        names.push_back("adam.m." + names[i]);
      }
      for (size_t i = 0; i < n; ++i) {
        targets.push_back(&ckpt.optim->v[i]);
        names.push_back("adam.v." + names[i]);
      }
    }

    const auto& dir = header.at("tensors");
    if (dir.size() != targets.size()) {
      throw DataError("checkpoint holds " + std::to_string(dir.size()) + " tensors, config implies " +
                      std::to_string(targets.size()));
    }
    for (size_t i = 0; i < targets.size(); ++i) {
      const auto& e = dir[i];
      Matrix<float>& t = *targets[i];
      if (e.at("name").get<std::string>() != names[i]) {
        throw DataError("checkpoint tensor " + std::to_string(i) + " is '" +
                        e.at("name").get<std::string>() + "', expected '" + names[i] + "'");
      }
      if (e.at("rows").get<size_t>() != t.rows || e.at("cols").get<size_t>() != t.cols) {
        throw DataError("checkpoint tensor '" + names[i] + "' has the wrong shape");
      }
      const size_t nbytes = t.size() * 4;
      if (bytes.size() < pos + nbytes) throw DataError("checkpoint data truncated at " + names[i]);
      for (size_t k = 0; k < t.size(); ++k) {
        t.data[k] = std::bit_cast<float>(get_u32(bytes, pos + 4 * k));
      }
      pos += nbytes;
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (pos != bytes.size()) throw DataError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write on checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mlm
