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
#pragma once

// Run configuration: a UTF-8 "key = value" file with [section] headers.
// Keys are addressed as "section.key"; keys before any header belong to the
// "run" section. "#" and ";" start comment lines.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "dt5/denoise.h"
#include "dt5/metrics.h"
#include "dt5/model.h"
#include "dt5/optim.h"
#include "dt5/tasks.h"

namespace dt5::config {

class ConfigFile {
 public:
  static ConfigFile Parse(const std::string& text);
  static ConfigFile Load(const std::string& path);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> Get(const std::string& key) const;
  void Set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  std::uint64_t GetUint(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Task { kPretrain, kSimilarity, kEntailment, kNer };
enum class OutputStrategy { kGenerate, kLinearHead };

Task ParseTask(const std::string& name);
const char* TaskName(Task task);
OutputStrategy ParseOutputStrategy(const std::string& name);
const char* OutputStrategyName(OutputStrategy s);

struct RunConfig {
  Task task = Task::kPretrain;
  OutputStrategy output_strategy = OutputStrategy::kLinearHead;
  model::ModelConfig model;
  optim::Options optimizer;
  std::size_t batch_size = 8;
  std::size_t grad_accum_steps = 1;
  std::size_t max_epochs = 4;
  std::size_t patience = 0;
  std::uint64_t seed = 0;
  bool embeddings_only = false;
  bool deterministic = false;
  // Input sequence length; inputs and targets are truncated to it.
  std::size_t seq_len = 512;

  // Pretraining corruption.
  double mask_rate = 0.15;
  bool collapse_runs = true;

  // Generation.
  std::size_t score_tokens = tasks::kScoreTokens;
  std::size_t beam_width = 5;
  std::size_t max_decode_len = 512;

  // NER.
  tasks::LabelLanguage label_language = tasks::LabelLanguage::kPortuguese;
  bool strip_accents = false;
  std::size_t window_size = 512;  // words
  std::size_t window_stride = 256;

  metrics::F1Average f1_average = metrics::F1Average::kMacro;

  // Paths.
  std::string vocab_path;
  std::string corpus_path;       // packed documents, one per line
  std::string pretrain_cache;    // optional DNPZ cache used instead of corpus
  std::string train_path;
  std::string validation_path;
  std::string test_path;
  std::string init_checkpoint;   // optional starting weights
  std::string checkpoint_dir;
};

// Builds a RunConfig: task defaults first, then values from the file.
// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig MakeRunConfig(const ConfigFile& file);

// Task defaults only.
RunConfig Defaults(Task task);

}  // namespace dt5::config
