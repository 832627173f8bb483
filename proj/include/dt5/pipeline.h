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

// Training, evaluation and data-preparation stages behind the CLI. The
// in-memory entry points take already-loaded data; the Run* functions read
// the paths named in a RunConfig and write into its checkpoint directory.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dt5/config.h"
#include "dt5/corpus.h"
#include "dt5/denoise.h"
#include "dt5/metrics.h"
#include "dt5/model.h"
#include "dt5/ner.h"
#include "dt5/tasks.h"
#include "dt5/unigram.h"

namespace dt5::pipeline {

using config::RunConfig;

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_metric;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when there is no validation
  bool stopped_early = false;
};

// Columns: epoch, train_loss, val_loss, val_metric, wall_seconds. Missing
// values and, in deterministic mode, wall time are written as "-".
void WriteTrainLog(const TrainLog& log, std::ostream& out, bool deterministic);
// Plot-ready curve: epoch, train, val.
void WriteCurve(const TrainLog& log, std::ostream& out);

struct Validation {
  double objective = 0.0;  // lower is better
  std::optional<double> loss;
  std::optional<double> metric;
};

using Validator = std::function<Validation(const model::ModelParams&)>;

struct TrainResult {
  model::ModelParams params;  // best epoch when validating, else final
  TrainLog log;
  TensorMap optimizer_state;
};

// Shared loop: per-epoch shuffle seeded by (seed, epoch), micro-batches of
// batch_size, one optimizer step per grad_accum_steps micro-batches (and at
// the end of the epoch), early stopping with patience when validate is set.
// Throws kDivergence on a non-finite loss or gradient.
TrainResult Train(model::ModelParams init, const std::vector<model::Example>& train,
                  model::Objective objective, const RunConfig& cfg,
                  const model::TrainableMask& mask, const Validator* validate);

// ---- example construction ---------------------------------------------------

// Drops trailing padding (it contributes nothing to loss or gradients).
model::TokenIds TrimPadding(std::span<const model::TokenId> ids);

std::vector<model::Example> PretrainExamples(std::span<const denoise::DenoisePair> pairs);
std::vector<model::Example> SimilarityExamples(std::span<const tasks::SentencePair> pairs,
                                               const unigram::Vocab& vocab,
                                               const RunConfig& cfg);
std::vector<model::Example> EntailmentExamples(std::span<const tasks::SentencePair> pairs,
                                               const unigram::Vocab& vocab,
                                               const RunConfig& cfg);

struct NerWindow {
  std::size_t doc = 0;
  std::size_t offset = 0;
  std::vector<std::string> words;
  tasks::BioSequence tags;
  model::Example example;
};

std::vector<NerWindow> NerWindows(std::span<const tasks::NerDocument> docs,
                                  const unigram::Vocab& vocab, const RunConfig& cfg);

// ---- predictors and evaluation ---------------------------------------------

using SimilarityPredictor = std::function<double(const tasks::SentencePair&)>;
using EntailmentPredictor = std::function<tasks::Entailment(const tasks::SentencePair&)>;
using NerPredictor = std::function<tasks::BioSequence(const tasks::NerDocument&)>;

SimilarityPredictor ModelSimilarityPredictor(const model::ModelParams& params,
                                             const unigram::Vocab& vocab,
                                             const RunConfig& cfg);
EntailmentPredictor ModelEntailmentPredictor(const model::ModelParams& params,
                                             const unigram::Vocab& vocab,
                                             const RunConfig& cfg);
NerPredictor ModelNerPredictor(const model::ModelParams& params,
                               const unigram::Vocab& vocab, const RunConfig& cfg);

metrics::RegressionReport EvaluateSimilarity(std::span<const tasks::SentencePair> pairs,
                                             const SimilarityPredictor& predict);
metrics::ClassificationReport EvaluateEntailment(
    std::span<const tasks::SentencePair> pairs, const EntailmentPredictor& predict,
    metrics::F1Average average = metrics::F1Average::kMacro);

struct NerEvaluation {
  ner::NerReport report;
  std::vector<tasks::BioSequence> predictions;
};

NerEvaluation EvaluateNer(std::span<const tasks::NerDocument> docs,
                          const NerPredictor& predict);

// ---- in-memory stages -------------------------------------------------------

model::ModelParams FreshModel(const RunConfig& cfg, const unigram::Vocab& vocab);

TrainResult Pretrain(const RunConfig& cfg, const model::ModelParams& init,
                     std::span<const denoise::DenoisePair> data);
TrainResult FinetuneSimilarity(const RunConfig& cfg, const unigram::Vocab& vocab,
                               const model::ModelParams& init,
                               std::span<const tasks::SentencePair> train,
                               std::span<const tasks::SentencePair> validation);
TrainResult FinetuneEntailment(const RunConfig& cfg, const unigram::Vocab& vocab,
                               const model::ModelParams& init,
                               std::span<const tasks::SentencePair> train,
                               std::span<const tasks::SentencePair> validation);
TrainResult FinetuneNer(const RunConfig& cfg, const unigram::Vocab& vocab,
                        const model::ModelParams& init,
                        std::span<const tasks::NerDocument> train,
                        std::span<const tasks::NerDocument> validation);

// ---- file-backed stages -----------------------------------------------------

struct PreprocessOptions {
  bool line_mode = false;  // one document per input line instead of per file
  std::size_t max_words = corpus::kDefaultMaxWords;
};

std::vector<corpus::PackedDocument> Preprocess(const std::vector<std::string>& inputs,
                                               const PreprocessOptions& options);

std::vector<std::string> ReadLines(const std::string& path);
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

// Holds "<dir>/.lock" for the lifetime of the object. Throws kUsage when the
// directory is already locked by another run.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

inline constexpr const char* kCheckpointFile = "model.ckpt";

std::string CheckpointPath(const RunConfig& cfg);

// Writes model.ckpt, train_log.tsv and curve.tsv into cfg.checkpoint_dir.
TrainResult RunPretrain(const RunConfig& cfg);
TrainResult RunFinetune(const RunConfig& cfg);

// split is "validation", "test" or "train". Writes eval-<split>.txt (key=value)
// and eval-<split>.tsv into the checkpoint directory and returns the
// key=value report text.
std::string RunEvaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                        const std::string& split);

}  // namespace dt5::pipeline
