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
#include "dt5/pipeline.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "dt5/checkpoint.h"
#include "dt5/decode.h"
#include "dt5/error.h"
#include "dt5/optim.h"
#include "dt5/rng.h"

namespace dt5::pipeline {

namespace {

using model::Example;
using model::ModelParams;
using model::Objective;
using tasks::NerDocument;
using tasks::SentencePair;

std::string FormatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string Optional(const std::optional<double>& v) {
  return v ? FormatNumber(*v) : "-";
}

model::TokenIds Truncate(model::TokenIds ids, std::size_t len) {
  if (ids.size() > len) ids.resize(len);
  return ids;
}

// Tensors a task trains: seq2seq tasks train everything except the pooled
// heads; head tasks train the encoder side plus their own head.
model::TrainableMask TaskMask(const ModelParams& params, Objective objective,
                              bool embeddings_only) {
  if (embeddings_only) return model::TrainableMask::EmbeddingsOnly(params);
  std::set<std::string> names;
  for (const auto& [name, t] : params.tensors) {
    const bool is_head = name.rfind("head/", 0) == 0;
    switch (objective) {
      case Objective::kSeq2Seq:
        if (!is_head) names.insert(name);
        break;
      case Objective::kRegression:
        if (name.rfind("encoder/", 0) == 0 || name == model::kEmbeddingName ||
            name.rfind("head/regression/", 0) == 0) {
          names.insert(name);
        }
        break;
      case Objective::kClassification:
        if (name.rfind("encoder/", 0) == 0 || name == model::kEmbeddingName ||
            name.rfind("head/classification/", 0) == 0) {
          names.insert(name);
        }
        break;
    }
  }
  return model::TrainableMask::Of(std::move(names));
}

double MeanLoss(const ModelParams& params, std::span<const Example> examples,
                Objective objective) {
  const auto [loss, weight] = model::LossSum(params, examples, objective);
  if (weight <= 0.0) ThrowData("validation set has no usable examples");
  return loss / weight;
}

std::optional<double> SafePearson(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  try {
    return metrics::Pearson(x, y);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::string> MaybeStrip(std::span<const std::string> words, bool strip) {
  std::vector<std::string> out(words.begin(), words.end());
  if (strip) {
    for (auto& w : out) w = tasks::StripAccents(w);
  }
  return out;
}

void CheckSequenceFits(const RunConfig& cfg, const model::ModelConfig& m) {
  if (cfg.seq_len > m.max_len) {
    ThrowUsage("train.seq_len " + std::to_string(cfg.seq_len) +
               " exceeds the model max_len " + std::to_string(m.max_len));
  }
}

unigram::Vocab LoadVocab(const RunConfig& cfg) {
  if (cfg.vocab_path.empty()) ThrowUsage("config is missing data.vocab");
  return unigram::Vocab::LoadFile(cfg.vocab_path);
}

ModelParams StartingModel(const RunConfig& cfg, const unigram::Vocab& vocab) {
  if (cfg.init_checkpoint.empty()) return FreshModel(cfg, vocab);
  ModelParams p = checkpoint::Load(cfg.init_checkpoint).params;
  if (p.config.vocab_size != vocab.size()) {
    ThrowData("incompatible checkpoint: vocabulary size " +
              std::to_string(p.config.vocab_size) + " vs " + std::to_string(vocab.size()));
  }
  CheckSequenceFits(cfg, p.config);
  return p;
}

std::vector<SentencePair> ReadPairs(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read " + path);
  return tasks::ReadPairsTsv(in);
}

std::vector<NerDocument> ReadNer(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read " + path);
  return tasks::ReadConll(in);
}

void SaveRun(const RunConfig& cfg, const TrainResult& r) {
  checkpoint::Save(CheckpointPath(cfg), r.params, r.optimizer_state);
  std::ostringstream log, curve;
  WriteTrainLog(r.log, log, cfg.deterministic);
  WriteCurve(r.log, curve);
  const std::filesystem::path dir(cfg.checkpoint_dir);
  WriteFile((dir / "train_log.tsv").string(), log.str());
  WriteFile((dir / "curve.tsv").string(), curve.str());
}

void PrepareDir(const RunConfig& cfg) {
  if (cfg.checkpoint_dir.empty()) ThrowUsage("config is missing output.checkpoint_dir");
  std::error_code ec;
  std::filesystem::create_directories(cfg.checkpoint_dir, ec);
  if (ec) ThrowData("cannot create " + cfg.checkpoint_dir + ": " + ec.message());
}

}  // namespace

// ---------------------------------------------------------------------------

void WriteTrainLog(const TrainLog& log, std::ostream& out, bool deterministic) {
  out << "epoch\ttrain_loss\tval_loss\tval_metric\twall_seconds\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << '\t' << FormatNumber(e.train_loss) << '\t' << Optional(e.val_loss)
        << '\t' << Optional(e.val_metric) << '\t'
        << (deterministic ? std::string("-") : FormatNumber(e.wall_seconds)) << '\n';
  }
  out << "# best_epoch=" << log.best_epoch
      << " stopped_early=" << (log.stopped_early ? "true" : "false") << '\n';
}

void WriteCurve(const TrainLog& log, std::ostream& out) {
  out << "epoch\ttrain\tval\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << '\t' << FormatNumber(e.train_loss) << '\t' << Optional(e.val_loss) << '\n';
  }
}

TrainResult Train(ModelParams init, const std::vector<Example>& train,
                  Objective objective, const RunConfig& cfg,
                  const model::TrainableMask& mask, const Validator* validate) {
  if (train.empty()) ThrowData("no training examples");
  TrainResult result;
  result.params = std::move(init);
  ModelParams& params = result.params;
  optim::Optimizer opt(cfg.optimizer);
  model::GradAccumulator acc = model::MakeAccumulator(params, mask);
  std::optional<ModelParams> best;
  TensorMap best_opt;
  double best_objective = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256 rng(MixSeed(cfg.seed, epoch));
    rng.Shuffle(order);

    double loss_sum = 0.0;
    double weight = 0.0;
    std::size_t micro = 0;
    acc.Reset();
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::vector<Example> batch;
      batch.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) batch.push_back(train[order[i]]);
      model::AccumulateGradients(params, batch, objective, mask, acc);
      ++micro;
      if (micro == cfg.grad_accum_steps || e == order.size()) {
        if (!std::isfinite(acc.loss_sum)) ThrowDiverged("diverged");
        loss_sum += acc.loss_sum;
        weight += acc.weight;
        if (acc.weight > 0.0) opt.Step(params.tensors, model::MeanGradients(acc), mask);
        acc.Reset();
        micro = 0;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weight > 0.0 ? loss_sum / weight : 0.0;
    if (!std::isfinite(rec.train_loss)) ThrowDiverged("diverged");
    bool stop = false;
    if (validate) {
      const Validation v = (*validate)(params);
      if (!std::isfinite(v.objective) || (v.loss && !std::isfinite(*v.loss))) {
        ThrowDiverged("diverged");
      }
      rec.val_loss = v.loss;
      rec.val_metric = v.metric;
      if (v.objective < best_objective) {
        best_objective = v.objective;
        best = params;
        best_opt = opt.ExportState();
        result.log.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best > cfg.patience) {
        stop = true;
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    if (stop) {
      result.log.stopped_early = true;
      break;
    }
  }
  if (best) {
    params = std::move(*best);
    result.optimizer_state = std::move(best_opt);
  } else {
    result.optimizer_state = opt.ExportState();
  }
  return result;
}

// ---------------------------------------------------------------------------

model::TokenIds TrimPadding(std::span<const model::TokenId> ids) {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == unigram::kPadId) --n;
  return model::TokenIds(ids.begin(), ids.begin() + n);
}

std::vector<Example> PretrainExamples(std::span<const denoise::DenoisePair> pairs) {
  std::vector<Example> out;
  for (const auto& p : pairs) {
    Example ex;
    ex.enc_ids = TrimPadding(p.input_ids);
    ex.target_ids = TrimPadding(p.target_ids);
    if (ex.enc_ids.empty()) ex.enc_ids.push_back(unigram::kEosId);
    if (ex.target_ids.empty()) continue;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> SimilarityExamples(std::span<const SentencePair> pairs,
                                        const unigram::Vocab& vocab,
                                        const RunConfig& cfg) {
  std::vector<Example> out;
  for (const auto& p : pairs) {
    if (!p.similarity) continue;
    Example ex;
    ex.enc_ids = Truncate(tasks::FormatAssinPair(vocab, p.sentence1, p.sentence2), cfg.seq_len);
    ex.score = *p.similarity;
    if (cfg.output_strategy == config::OutputStrategy::kGenerate) {
      ex.target_ids = Truncate(tasks::MakeSimilarityTarget(*p.similarity, vocab), cfg.seq_len);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> EntailmentExamples(std::span<const SentencePair> pairs,
                                        const unigram::Vocab& vocab,
                                        const RunConfig& cfg) {
  std::vector<Example> out;
  for (const auto& p : pairs) {
    if (!p.entailment) continue;
    Example ex;
    ex.enc_ids = Truncate(tasks::FormatAssinPair(vocab, p.sentence1, p.sentence2), cfg.seq_len);
    ex.label = static_cast<int>(*p.entailment);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<NerWindow> NerWindows(std::span<const NerDocument> docs,
                                  const unigram::Vocab& vocab, const RunConfig& cfg) {
  std::vector<NerWindow> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const NerDocument& doc = docs[d];
    for (std::size_t off :
         tasks::SlidingWindowOffsets(doc.words.size(), cfg.window_size, cfg.window_stride)) {
      const std::size_t len = std::min(cfg.window_size, doc.words.size() - off);
      NerWindow w;
      w.doc = d;
      w.offset = off;
      w.words = MaybeStrip(std::span(doc.words).subspan(off, len), cfg.strip_accents);
      // A window may open inside an entity; its first word then starts one.
      w.tags = ner::RepairBio(tasks::BioSequence(doc.tags.begin() + off,
                                                 doc.tags.begin() + off + len));
      w.example.enc_ids = Truncate(tasks::FormatNerInput(vocab, w.words), cfg.seq_len);
      model::TokenIds target = unigram::Encode(
          vocab, tasks::BuildNerTarget(w.words, w.tags, cfg.label_language));
      target.push_back(unigram::kEosId);
      w.example.target_ids = Truncate(std::move(target), cfg.seq_len);
      out.push_back(std::move(w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

SimilarityPredictor ModelSimilarityPredictor(const ModelParams& params,
                                             const unigram::Vocab& vocab,
                                             const RunConfig& cfg) {
  return [&params, &vocab, cfg](const SentencePair& p) {
    const auto ids = Truncate(tasks::FormatAssinPair(vocab, p.sentence1, p.sentence2), cfg.seq_len);
    if (cfg.output_strategy == config::OutputStrategy::kGenerate) {
      const auto out = decode::GreedyDecode(params, ids, cfg.score_tokens);
      return tasks::ParseScoreString(out, vocab).value;
    }
    return model::RegressionHead(params, model::EncoderMeanPool(params, ids));
  };
}

EntailmentPredictor ModelEntailmentPredictor(const ModelParams& params,
                                             const unigram::Vocab& vocab,
                                             const RunConfig& cfg) {
  return [&params, &vocab, cfg](const SentencePair& p) {
    const auto ids = Truncate(tasks::FormatAssinPair(vocab, p.sentence1, p.sentence2), cfg.seq_len);
    const auto probs = model::ClassificationHead(params, model::EncoderMeanPool(params, ids));
    return probs[1] > probs[0] ? tasks::Entailment::kNone : tasks::Entailment::kEntail;
  };
}

NerPredictor ModelNerPredictor(const ModelParams& params, const unigram::Vocab& vocab,
                               const RunConfig& cfg) {
  return [&params, &vocab, cfg](const NerDocument& doc) {
    std::vector<ner::WindowTags> windows;
    for (std::size_t off :
         tasks::SlidingWindowOffsets(doc.words.size(), cfg.window_size, cfg.window_stride)) {
      const std::size_t len = std::min(cfg.window_size, doc.words.size() - off);
      const auto words = MaybeStrip(std::span(doc.words).subspan(off, len), cfg.strip_accents);
      const auto ids = Truncate(tasks::FormatNerInput(vocab, words), cfg.seq_len);
      auto out = decode::BeamDecode(params, ids, cfg.beam_width, cfg.max_decode_len);
      if (!out.empty() && out.back() == unigram::kEosId) out.pop_back();
      const auto parsed = ner::ParseTaggedOutput(unigram::Decode(vocab, out));
      windows.push_back({off, ner::ToBio(parsed.segments, words).tags});
    }
    return ner::MergeWindows(windows, doc.words.size());
  };
}

metrics::RegressionReport EvaluateSimilarity(std::span<const SentencePair> pairs,
                                             const SimilarityPredictor& predict) {
  std::vector<double> pred, gold;
  for (const auto& p : pairs) {
    if (!p.similarity) continue;
    pred.push_back(predict(p));
    gold.push_back(*p.similarity);
  }
  return metrics::EvaluateRegression(pred, gold);
}

metrics::ClassificationReport EvaluateEntailment(std::span<const SentencePair> pairs,
                                                 const EntailmentPredictor& predict,
                                                 metrics::F1Average average) {
  std::vector<int> pred, gold;
  for (const auto& p : pairs) {
    if (!p.entailment) continue;
    pred.push_back(static_cast<int>(predict(p)));
    gold.push_back(static_cast<int>(*p.entailment));
  }
  return metrics::EvaluateClassification(pred, gold, average);
}

NerEvaluation EvaluateNer(std::span<const NerDocument> docs, const NerPredictor& predict) {
  NerEvaluation ev;
  for (const auto& doc : docs) {
    tasks::BioSequence pred = ner::RepairBio(predict(doc));
    if (pred.size() != doc.words.size()) ThrowData("prediction length differs from document");
    const auto gold_spans = ner::ExtractEntities(doc.tags);
    const auto pred_spans = ner::ExtractEntities(pred);
    ev.report = ner::Combine(ev.report, ner::EntityPrf(gold_spans, pred_spans));
    ev.predictions.push_back(std::move(pred));
  }
  return ev;
}

// ---------------------------------------------------------------------------

ModelParams FreshModel(const RunConfig& cfg, const unigram::Vocab& vocab) {
  model::ModelConfig m = cfg.model;
  m.vocab_size = static_cast<std::uint32_t>(vocab.size());
  CheckSequenceFits(cfg, m);
  return model::InitModel(m, cfg.seed);
}

TrainResult Pretrain(const RunConfig& cfg, const ModelParams& init,
                     std::span<const denoise::DenoisePair> data) {
  const auto examples = PretrainExamples(data);
  const auto mask = TaskMask(init, Objective::kSeq2Seq, cfg.embeddings_only);
  return Train(init, examples, Objective::kSeq2Seq, cfg, mask, nullptr);
}

TrainResult FinetuneSimilarity(const RunConfig& cfg, const unigram::Vocab& vocab,
                               const ModelParams& init,
                               std::span<const SentencePair> train,
                               std::span<const SentencePair> validation) {
  const bool generate = cfg.output_strategy == config::OutputStrategy::kGenerate;
  const Objective objective = generate ? Objective::kSeq2Seq : Objective::kRegression;
  const auto examples = SimilarityExamples(train, vocab, cfg);
  const auto val_examples = SimilarityExamples(validation, vocab, cfg);
  const std::vector<SentencePair> val(validation.begin(), validation.end());
  Validator validate = [&](const ModelParams& params) {
    Validation v;
    if (generate) {
      const auto report_pred = ModelSimilarityPredictor(params, vocab, cfg);
      std::vector<double> pred, gold;
      for (const auto& p : val) {
        if (!p.similarity) continue;
        pred.push_back(report_pred(p));
        gold.push_back(*p.similarity);
      }
      v.objective = metrics::Mse(pred, gold);
      v.loss = MeanLoss(params, val_examples, Objective::kSeq2Seq);
      v.metric = SafePearson(pred, gold);
    } else {
      std::vector<double> pred, gold;
      const auto predict = ModelSimilarityPredictor(params, vocab, cfg);
      for (const auto& p : val) {
        if (!p.similarity) continue;
        pred.push_back(predict(p));
        gold.push_back(*p.similarity);
      }
      v.objective = metrics::Mse(pred, gold);
      v.loss = v.objective;
      v.metric = SafePearson(pred, gold);
    }
    return v;
  };
  const auto mask = TaskMask(init, objective, cfg.embeddings_only);
  return Train(init, examples, objective, cfg, mask, val_examples.empty() ? nullptr : &validate);
}

TrainResult FinetuneEntailment(const RunConfig& cfg, const unigram::Vocab& vocab,
                               const ModelParams& init,
                               std::span<const SentencePair> train,
                               std::span<const SentencePair> validation) {
  const auto examples = EntailmentExamples(train, vocab, cfg);
  const auto val_examples = EntailmentExamples(validation, vocab, cfg);
  const std::vector<SentencePair> val(validation.begin(), validation.end());
  Validator validate = [&](const ModelParams& params) {
    Validation v;
    v.loss = MeanLoss(params, val_examples, Objective::kClassification);
    v.objective = *v.loss;
    v.metric = EvaluateEntailment(val, ModelEntailmentPredictor(params, vocab, cfg)).accuracy;
    return v;
  };
  const auto mask = TaskMask(init, Objective::kClassification, cfg.embeddings_only);
  return Train(init, examples, Objective::kClassification, cfg, mask,
               val_examples.empty() ? nullptr : &validate);
}

TrainResult FinetuneNer(const RunConfig& cfg, const unigram::Vocab& vocab,
                        const ModelParams& init, std::span<const NerDocument> train,
                        std::span<const NerDocument> validation) {
  std::vector<Example> examples;
  for (auto& w : NerWindows(train, vocab, cfg)) examples.push_back(std::move(w.example));
  std::vector<Example> val_examples;
  for (auto& w : NerWindows(validation, vocab, cfg)) val_examples.push_back(std::move(w.example));
  const std::vector<NerDocument> val(validation.begin(), validation.end());
  Validator validate = [&](const ModelParams& params) {
    Validation v;
    v.loss = MeanLoss(params, val_examples, Objective::kSeq2Seq);
    const double f1 = EvaluateNer(val, ModelNerPredictor(params, vocab, cfg)).report.micro.f1;
    v.metric = f1;
    v.objective = -f1;
    return v;
  };
  const auto mask = TaskMask(init, Objective::kSeq2Seq, cfg.embeddings_only);
  return Train(init, examples, Objective::kSeq2Seq, cfg, mask,
               val.empty() ? nullptr : &validate);
}

// ---------------------------------------------------------------------------

std::vector<corpus::PackedDocument> Preprocess(const std::vector<std::string>& inputs,
                                               const PreprocessOptions& options) {
  std::vector<corpus::PackedDocument> docs;
  auto add = [&](std::string_view raw) {
    const std::string fixed = corpus::FixEncoding(raw);
    for (auto& d : corpus::PackSentences(corpus::SplitSentences(fixed), options.max_words)) {
      docs.push_back(std::move(d));
    }
  };
  for (const auto& path : inputs) {
    if (options.line_mode) {
      for (const auto& line : ReadLines(path)) add(line);
    } else {
      add(ReadFile(path));
    }
  }
  return docs;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) ThrowData("cannot write " + path);
  out << contents;
  if (!out) ThrowData("failed writing " + path);
}

DirLock::DirLock(const std::string& dir)
    : path_((std::filesystem::path(dir) / ".lock").string()) {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) ThrowUsage("checkpoint directory is locked by another run: " + path_);
    ThrowData("cannot create lock file " + path_);
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

std::string CheckpointPath(const RunConfig& cfg) {
  return (std::filesystem::path(cfg.checkpoint_dir) / kCheckpointFile).string();
}

TrainResult RunPretrain(const RunConfig& cfg) {
  if (cfg.task != config::Task::kPretrain) ThrowUsage("pretrain needs run.task = pretrain");
  const unigram::Vocab vocab = LoadVocab(cfg);
  std::vector<denoise::DenoisePair> data;
  if (!cfg.pretrain_cache.empty()) {
    std::ifstream in(cfg.pretrain_cache, std::ios::binary);
    if (!in) ThrowData("cannot read " + cfg.pretrain_cache);
    std::uint32_t max_len = 0;
    data = denoise::ReadCache(in, &max_len);
  } else if (!cfg.corpus_path.empty()) {
    denoise::CorruptionConfig cc{cfg.mask_rate, static_cast<std::uint32_t>(cfg.seq_len),
                                 cfg.seed, cfg.collapse_runs};
    data = denoise::MakePretrainBatch(ReadLines(cfg.corpus_path), vocab, cc);
  } else {
    ThrowUsage("config needs data.corpus or data.pretrain_cache");
  }
  for (const auto& p : data) {
    for (auto id : p.input_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) ThrowData("cache id outside the vocabulary");
    }
  }
  PrepareDir(cfg);
  DirLock lock(cfg.checkpoint_dir);
  const ModelParams init = StartingModel(cfg, vocab);
  TrainResult r = Pretrain(cfg, init, data);
  SaveRun(cfg, r);
  return r;
}

TrainResult RunFinetune(const RunConfig& cfg) {
  const unigram::Vocab vocab = LoadVocab(cfg);
  if (cfg.train_path.empty()) ThrowUsage("config is missing data.train");
  PrepareDir(cfg);
  DirLock lock(cfg.checkpoint_dir);
  const ModelParams init = StartingModel(cfg, vocab);
  TrainResult r;
  switch (cfg.task) {
    case config::Task::kSimilarity:
      r = FinetuneSimilarity(cfg, vocab, init, ReadPairs(cfg.train_path),
                             ReadPairs(cfg.validation_path));
      break;
    case config::Task::kEntailment:
      r = FinetuneEntailment(cfg, vocab, init, ReadPairs(cfg.train_path),
                             ReadPairs(cfg.validation_path));
      break;
    case config::Task::kNer:
      r = FinetuneNer(cfg, vocab, init, ReadNer(cfg.train_path), ReadNer(cfg.validation_path));
      break;
    case config::Task::kPretrain:
      ThrowUsage("finetune needs a similarity, entailment or ner task");
  }
  SaveRun(cfg, r);
  return r;
}

std::string RunEvaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                        const std::string& split) {
  const unigram::Vocab vocab = LoadVocab(cfg);
  const ModelParams params = checkpoint::Load(checkpoint_path).params;
  if (params.config.vocab_size != vocab.size()) {
    ThrowData("incompatible checkpoint: vocabulary size " +
              std::to_string(params.config.vocab_size) + " vs " + std::to_string(vocab.size()));
  }
  std::string path;
  if (split == "validation") {
    path = cfg.validation_path;
  } else if (split == "test") {
    path = cfg.test_path;
  } else if (split == "train") {
    path = cfg.train_path;
  } else {
    ThrowUsage("split must be train, validation or test");
  }
  if (path.empty()) ThrowUsage("config has no data path for split " + split);
  PrepareDir(cfg);
  const std::filesystem::path dir(cfg.checkpoint_dir);
  std::ostringstream kv, tsv;
  switch (cfg.task) {
    case config::Task::kSimilarity: {
      const auto pairs = ReadPairs(path);
      const auto r = EvaluateSimilarity(pairs, ModelSimilarityPredictor(params, vocab, cfg));
      metrics::WriteReport(r, kv);
      metrics::WriteRow(&r, nullptr, tsv);
      break;
    }
    case config::Task::kEntailment: {
      const auto pairs = ReadPairs(path);
      const auto r = EvaluateEntailment(pairs, ModelEntailmentPredictor(params, vocab, cfg),
                                        cfg.f1_average);
      metrics::WriteReport(r, kv);
      metrics::WriteRow(nullptr, &r, tsv);
      break;
    }
    case config::Task::kNer: {
      const auto docs = ReadNer(path);
      const auto ev = EvaluateNer(docs, ModelNerPredictor(params, vocab, cfg));
      ner::WriteReport(ev.report, kv);
      ner::WriteTable(ev.report, tsv);
      std::ostringstream conll;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        ner::WriteConllPredictions(docs[i].words, docs[i].tags, ev.predictions[i], conll);
      }
      WriteFile((dir / ("eval-" + split + ".conll")).string(), conll.str());
      break;
    }
    case config::Task::kPretrain: {
      const auto lines = ReadLines(path);
      denoise::CorruptionConfig cc{cfg.mask_rate, static_cast<std::uint32_t>(cfg.seq_len),
                                   cfg.seed, cfg.collapse_runs};
      const auto examples = PretrainExamples(denoise::MakePretrainBatch(lines, vocab, cc));
      const double loss = MeanLoss(params, examples, Objective::kSeq2Seq);
      kv << "n=" << examples.size() << "\ncross_entropy=" << FormatNumber(loss) << '\n';
      tsv << "cross_entropy\n" << FormatNumber(loss) << '\n';
      break;
    }
  }
  WriteFile((dir / ("eval-" + split + ".txt")).string(), kv.str());
  WriteFile((dir / ("eval-" + split + ".tsv")).string(), tsv.str());
  return kv.str();
}

}  // namespace dt5::pipeline
