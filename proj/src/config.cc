// Copyright 2026 The dt5 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "dt5/config.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "dt5/error.h"

namespace dt5::config {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "run.task", "run.output_strategy", "run.seed", "run.deterministic",
      "model.d_model", "model.n_heads", "model.d_ff", "model.n_enc_layers",
      "model.n_dec_layers", "model.max_len", "model.position_scheme",
      "model.tie_embeddings", "model.num_buckets", "model.max_distance",
      "optimizer.name", "optimizer.lr", "optimizer.beta1", "optimizer.beta2",
      "optimizer.eps", "optimizer.weight_decay", "optimizer.decay_exponent",
      "optimizer.clip_threshold",
      "train.batch_size", "train.grad_accum_steps", "train.max_epochs",
      "train.patience", "train.embeddings_only", "train.seq_len",
      "pretrain.mask_rate", "pretrain.collapse_runs",
      "decode.score_tokens", "decode.beam_width", "decode.max_len",
      "ner.label_language", "ner.strip_accents", "ner.window_size",
      "ner.window_stride",
      "eval.f1_average",
      "data.vocab", "data.corpus", "data.pretrain_cache", "data.train",
      "data.validation", "data.test", "data.init_checkpoint",
      "output.checkpoint_dir",
  };
  return keys;
}

}  // namespace

ConfigFile ConfigFile::Parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  std::string section = "run";
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') ThrowUsage("config line " + std::to_string(line_no) + ": bad section header");
      section = Trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      ThrowUsage("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) ThrowUsage("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[section + "." + key] = Trim(line.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowUsage("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

std::optional<std::string> ConfigFile::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::GetString(const std::string& key, const std::string& fallback) const {
  return Get(key).value_or(fallback);
}

double ConfigFile::GetDouble(const std::string& key, double fallback) const {
  const auto v = Get(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
    ThrowUsage("config " + key + ": expected a number, got '" + *v + "'");
  }
  return out;
}

std::uint64_t ConfigFile::GetUint(const std::string& key, std::uint64_t fallback) const {
  const auto v = Get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
    ThrowUsage("config " + key + ": expected a non-negative integer, got '" + *v + "'");
  }
  return out;
}

bool ConfigFile::GetBool(const std::string& key, bool fallback) const {
  const auto v = Get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  ThrowUsage("config " + key + ": expected true or false, got '" + *v + "'");
}

Task ParseTask(const std::string& name) {
  if (name == "pretrain") return Task::kPretrain;
  if (name == "similarity") return Task::kSimilarity;
  if (name == "entailment") return Task::kEntailment;
  if (name == "ner") return Task::kNer;
  ThrowUsage("unknown task: " + name);
}

const char* TaskName(Task task) {
  switch (task) {
    case Task::kPretrain: return "pretrain";
    case Task::kSimilarity: return "similarity";
    case Task::kEntailment: return "entailment";
    case Task::kNer: return "ner";
  }
  return "?";
}

OutputStrategy ParseOutputStrategy(const std::string& name) {
  if (name == "generate") return OutputStrategy::kGenerate;
  if (name == "linear-head") return OutputStrategy::kLinearHead;
  ThrowUsage("unknown output strategy: " + name);
}

const char* OutputStrategyName(OutputStrategy s) {
  return s == OutputStrategy::kGenerate ? "generate" : "linear-head";
}

RunConfig Defaults(Task task) {
  RunConfig c;
  c.task = task;
  switch (task) {
    case Task::kPretrain:
      c.optimizer.kind = optim::Kind::kAdafactor;
      c.optimizer.lr = 0.003;
      c.max_epochs = 4;
      c.batch_size = 8;
      c.seq_len = 512;
      break;
    case Task::kSimilarity:
    case Task::kEntailment:
      c.optimizer.kind = optim::Kind::kRAdam;
      c.optimizer.lr = 1e-4;
      c.max_epochs = 50;
      c.patience = task == Task::kSimilarity ? 5 : 10;
      c.batch_size = 32;
      c.seq_len = 128;
      break;
    case Task::kNer:
      c.optimizer.kind = optim::Kind::kAdamW;
      c.optimizer.lr = 2e-4;
      c.optimizer.weight_decay = 0.01;
      c.batch_size = 2;
      c.grad_accum_steps = 4;
      c.max_epochs = 50;
      c.patience = 5;
      c.seq_len = 512;
      break;
  }
  return c;
}

RunConfig MakeRunConfig(const ConfigFile& f) {
  for (const auto& [key, value] : f.values()) {
    if (!KnownKeys().count(key)) ThrowUsage("unknown config key: " + key);
  }
  const auto task_name = f.Get("run.task");
  if (!task_name) ThrowUsage("config is missing run.task");
  RunConfig c = Defaults(ParseTask(*task_name));
  c.output_strategy = ParseOutputStrategy(
      f.GetString("run.output_strategy", OutputStrategyName(c.output_strategy)));
  c.seed = f.GetUint("run.seed", c.seed);
  c.deterministic = f.GetBool("run.deterministic", c.deterministic);

  auto u32 = [&](const std::string& key, std::uint32_t fallback) {
    const auto v = f.GetUint(key, fallback);
    if (v > 0xFFFFFFFFull) ThrowUsage("config " + key + " is too large");
    return static_cast<std::uint32_t>(v);
  };
  model::ModelConfig& m = c.model;
  m.d_model = u32("model.d_model", m.d_model);
  m.n_heads = u32("model.n_heads", m.n_heads);
  m.d_ff = u32("model.d_ff", m.d_ff);
  m.n_enc_layers = u32("model.n_enc_layers", m.n_enc_layers);
  m.n_dec_layers = u32("model.n_dec_layers", m.n_dec_layers);
  m.max_len = u32("model.max_len", m.max_len);
  const std::string scheme = f.GetString("model.position_scheme", "learned-absolute");
  if (scheme == "learned-absolute") {
    m.position_scheme = model::PositionScheme::kLearnedAbsolute;
  } else if (scheme == "relative-bucket") {
    m.position_scheme = model::PositionScheme::kRelativeBucket;
  } else {
    ThrowUsage("unknown position scheme: " + scheme);
  }
  m.tie_embeddings = f.GetBool("model.tie_embeddings", m.tie_embeddings);
  m.num_buckets = u32("model.num_buckets", m.num_buckets);
  m.max_distance = u32("model.max_distance", m.max_distance);

  optim::Options& o = c.optimizer;
  if (auto name = f.Get("optimizer.name")) o.kind = optim::ParseKind(*name);
  o.lr = f.GetDouble("optimizer.lr", o.lr);
  o.beta1 = f.GetDouble("optimizer.beta1", o.beta1);
  o.beta2 = f.GetDouble("optimizer.beta2", o.beta2);
  o.eps = f.GetDouble("optimizer.eps", o.eps);
  o.weight_decay = f.GetDouble("optimizer.weight_decay", o.weight_decay);
  o.decay_exponent = f.GetDouble("optimizer.decay_exponent", o.decay_exponent);
  o.clip_threshold = f.GetDouble("optimizer.clip_threshold", o.clip_threshold);
  if (!(o.lr > 0.0)) ThrowUsage("optimizer.lr must be positive");

  c.batch_size = f.GetUint("train.batch_size", c.batch_size);
  c.grad_accum_steps = f.GetUint("train.grad_accum_steps", c.grad_accum_steps);
  c.max_epochs = f.GetUint("train.max_epochs", c.max_epochs);
  c.patience = f.GetUint("train.patience", c.patience);
  c.embeddings_only = f.GetBool("train.embeddings_only", c.embeddings_only);
  c.seq_len = f.GetUint("train.seq_len", c.seq_len);
  if (c.batch_size == 0 || c.grad_accum_steps == 0) {
    ThrowUsage("batch_size and grad_accum_steps must be positive");
  }
  if (c.seq_len < 2) ThrowUsage("train.seq_len must be at least 2");

  c.mask_rate = f.GetDouble("pretrain.mask_rate", c.mask_rate);
  if (!(c.mask_rate > 0.0 && c.mask_rate < 1.0)) ThrowUsage("pretrain.mask_rate must lie in (0, 1)");
  c.collapse_runs = f.GetBool("pretrain.collapse_runs", c.collapse_runs);

  c.score_tokens = f.GetUint("decode.score_tokens", c.score_tokens);
  c.beam_width = f.GetUint("decode.beam_width", c.beam_width);
  c.max_decode_len = f.GetUint("decode.max_len", c.max_decode_len);
  if (c.beam_width == 0 || c.score_tokens == 0 || c.max_decode_len == 0) {
    ThrowUsage("decode settings must be positive");
  }

  if (auto lang = f.Get("ner.label_language")) c.label_language = tasks::ParseLabelLanguage(*lang);
  c.strip_accents = f.GetBool("ner.strip_accents", c.strip_accents);
  c.window_size = f.GetUint("ner.window_size", c.window_size);
  c.window_stride = f.GetUint("ner.window_stride", c.window_stride);
  if (!(c.window_size > c.window_stride && c.window_stride > 0)) {
    ThrowUsage("ner.window_size must exceed ner.window_stride > 0");
  }

  const std::string avg = f.GetString("eval.f1_average", "macro");
  if (avg == "macro") {
    c.f1_average = metrics::F1Average::kMacro;
  } else if (avg == "weighted") {
    c.f1_average = metrics::F1Average::kWeighted;
  } else {
    ThrowUsage("eval.f1_average must be macro or weighted");
  }

  c.vocab_path = f.GetString("data.vocab", "");
  c.corpus_path = f.GetString("data.corpus", "");
  c.pretrain_cache = f.GetString("data.pretrain_cache", "");
  c.train_path = f.GetString("data.train", "");
  c.validation_path = f.GetString("data.validation", "");
  c.test_path = f.GetString("data.test", "");
  c.init_checkpoint = f.GetString("data.init_checkpoint", "");
  c.checkpoint_dir = f.GetString("output.checkpoint_dir", "");
  return c;
}

}  // namespace dt5::config
