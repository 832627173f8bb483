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
// Command-line front end: preprocess, train-vocab, make-pretrain-data,
// pretrain, finetune, evaluate, decode.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dt5/checkpoint.h"
#include "dt5/config.h"
#include "dt5/corpus.h"
#include "dt5/decode.h"
#include "dt5/denoise.h"
#include "dt5/error.h"
#include "dt5/pipeline.h"
#include "dt5/tasks.h"
#include "dt5/unigram.h"

namespace {

using namespace dt5;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

config::RunConfig LoadRunConfig(const Globals& g) {
  if (g.config_path.empty()) ThrowUsage("--config is required for this command");
  config::ConfigFile file = config::ConfigFile::Load(g.config_path);
  if (g.seed) file.Set("run.seed", std::to_string(*g.seed));
  if (g.deterministic) file.Set("run.deterministic", "true");
  return config::MakeRunConfig(file);
}

void PrintLog(const pipeline::TrainResult& r, bool deterministic) {
  pipeline::WriteTrainLog(r.log, std::cout, deterministic);
}

int Run(int argc, char** argv) {
  CLI::App app{"Seq2seq pretraining and fine-tuning toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Run configuration file")->configurable(false);
  app.add_option("--seed", g.seed, "Override run.seed");
  app.add_flag("--deterministic", g.deterministic,
               "Timestamp-free logs (runs are always seeded)");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Repair, split and pack raw text");
  std::vector<std::string> pre_inputs;
  std::string pre_output, pre_stats;
  pipeline::PreprocessOptions pre_opts;
  pre->add_option("--input", pre_inputs, "Raw text files")->required();
  pre->add_flag("--line-mode", pre_opts.line_mode, "One document per input line");
  pre->add_option("--max-words", pre_opts.max_words, "Words per packed document")
      ->check(CLI::PositiveNumber);
  pre->add_option("--output", pre_output, "Packed documents, one per line")->required();
  pre->add_option("--stats", pre_stats, "Corpus statistics report");

  // train-vocab
  auto* tv = app.add_subcommand("train-vocab", "Train a unigram vocabulary");
  std::string tv_input, tv_output;
  unigram::TrainerOptions tv_opts;
  tv->add_option("--input", tv_input, "Text file, one document or sentence per line")->required();
  tv->add_option("--output", tv_output, "Vocabulary file")->required();
  tv->add_option("--vocab-size", tv_opts.vocab_size, "Final size including control ids");
  tv->add_option("--seed-size", tv_opts.seed_size, "Seed vocabulary size (0: automatic)");
  tv->add_option("--shrink-factor", tv_opts.prune.shrink_factor, "Fraction kept per round");

  // make-pretrain-data
  auto* mp = app.add_subcommand("make-pretrain-data", "Corrupt packed documents into a cache");
  std::string mp_output;
  mp->add_option("--output", mp_output, "Cache file")->required();

  auto* pt = app.add_subcommand("pretrain", "Denoising pretraining");
  auto* ft = app.add_subcommand("finetune", "Fine-tune on a downstream task");

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a data split");
  std::string ev_checkpoint, ev_split = "test";
  ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint (default: the run's model.ckpt)");
  ev->add_option("--split", ev_split, "train, validation or test");

  auto* dc = app.add_subcommand("decode", "Generate outputs for input lines");
  std::string dc_checkpoint, dc_input = "-", dc_format = "raw";
  std::size_t dc_beam = 0, dc_max_out = 0;
  dc->add_option("--checkpoint", dc_checkpoint, "Checkpoint (default: the run's model.ckpt)");
  dc->add_option("--input", dc_input, "Input lines ('-' for stdin)");
  dc->add_option("--beam", dc_beam, "Beam width (1 is greedy; default from config)");
  dc->add_option("--max-out", dc_max_out, "Maximum generated tokens");
  dc->add_option("--format", dc_format, "raw, assin (s1<TAB>s2) or ner (words)")
      ->check(CLI::IsMember({"raw", "assin", "ner"}));

  for (auto* sub : {pre, tv, mp, pt, ft, ev, dc}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (pre->parsed()) {
    const auto docs = pipeline::Preprocess(pre_inputs, pre_opts);
    std::ostringstream packed;
    corpus::WritePacked(docs, packed);
    pipeline::WriteFile(pre_output, packed.str());
    if (!pre_stats.empty()) {
      std::ostringstream stats;
      corpus::WriteStats(corpus::ComputeStats(docs), stats);
      pipeline::WriteFile(pre_stats, stats.str());
    }
    std::cerr << "packed " << docs.size() << " documents\n";
    return 0;
  }
  if (tv->parsed()) {
    const auto lines = pipeline::ReadLines(tv_input);
    const auto vocab = unigram::TrainVocab(lines, tv_opts);
    vocab.SaveFile(tv_output);
    std::cerr << "vocabulary of " << vocab.size() << " pieces\n";
    return 0;
  }
  if (mp->parsed()) {
    const auto cfg = LoadRunConfig(g);
    if (cfg.vocab_path.empty() || cfg.corpus_path.empty()) {
      ThrowUsage("make-pretrain-data needs data.vocab and data.corpus");
    }
    const auto vocab = unigram::Vocab::LoadFile(cfg.vocab_path);
    denoise::CorruptionConfig cc{cfg.mask_rate, static_cast<std::uint32_t>(cfg.seq_len),
                                 cfg.seed, cfg.collapse_runs};
    const auto pairs = denoise::MakePretrainBatch(pipeline::ReadLines(cfg.corpus_path), vocab, cc);
    std::ostringstream out;
    denoise::WriteCache(out, cc.max_len, pairs);
    pipeline::WriteFile(mp_output, out.str());
    std::cerr << "wrote " << pairs.size() << " examples\n";
    return 0;
  }
  if (pt->parsed()) {
    const auto cfg = LoadRunConfig(g);
    PrintLog(pipeline::RunPretrain(cfg), cfg.deterministic);
    return 0;
  }
  if (ft->parsed()) {
    const auto cfg = LoadRunConfig(g);
    PrintLog(pipeline::RunFinetune(cfg), cfg.deterministic);
    return 0;
  }
  if (ev->parsed()) {
    const auto cfg = LoadRunConfig(g);
    const std::string ck = ev_checkpoint.empty() ? pipeline::CheckpointPath(cfg) : ev_checkpoint;
    std::cout << pipeline::RunEvaluate(cfg, ck, ev_split);
    return 0;
  }
  if (dc->parsed()) {
    const auto cfg = LoadRunConfig(g);
    const std::string ck = dc_checkpoint.empty() ? pipeline::CheckpointPath(cfg) : dc_checkpoint;
    const auto params = checkpoint::Load(ck).params;
    if (cfg.vocab_path.empty()) ThrowUsage("config is missing data.vocab");
    const auto vocab = unigram::Vocab::LoadFile(cfg.vocab_path);
    if (params.config.vocab_size != vocab.size()) {
      ThrowData("incompatible checkpoint: vocabulary size mismatch");
    }
    const std::size_t beam = dc_beam ? dc_beam : cfg.beam_width;
    const std::size_t max_out = dc_max_out ? dc_max_out : cfg.max_decode_len;
    std::vector<std::string> lines;
    if (dc_input == "-") {
      for (std::string line; std::getline(std::cin, line);) lines.push_back(line);
    } else {
      lines = pipeline::ReadLines(dc_input);
    }
    for (const auto& line : lines) {
      unigram::TokenIds ids;
      if (dc_format == "assin") {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) ThrowData("assin input lines need s1<TAB>s2");
        ids = tasks::FormatAssinPair(vocab, line.substr(0, tab), line.substr(tab + 1));
      } else if (dc_format == "ner") {
        auto words = corpus::SplitWords(line);
        if (cfg.strip_accents) {
          for (auto& w : words) w = tasks::StripAccents(w);
        }
        ids = tasks::FormatNerInput(vocab, words);
      } else {
        ids = unigram::Encode(vocab, line);
        ids.push_back(unigram::kEosId);
      }
      if (ids.size() > params.config.max_len) ids.resize(params.config.max_len);
      auto out = decode::BeamDecode(params, ids, beam, max_out);
      if (!out.empty() && out.back() == unigram::kEosId) out.pop_back();
      std::cout << unigram::Decode(vocab, out) << '\n';
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const dt5::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(dt5::ErrorKind::kData);
  }
}
