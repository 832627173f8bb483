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

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dt5/checkpoint.h"
#include "dt5/error.h"
#include "dt5/optim.h"

namespace dt5::checkpoint {
namespace {

model::ModelParams Small(model::PositionScheme scheme, bool tie) {
  model::ModelConfig c;
  c.vocab_size = 30;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.n_enc_layers = 1;
  c.n_dec_layers = 2;
  c.max_len = 12;
  c.position_scheme = scheme;
  c.tie_embeddings = tie;
  c.num_buckets = 6;
  c.max_distance = 10;
  return model::InitModel(c, 3);
}

TEST_CASE("round trip is bit exact after storage rounding") {
  for (auto scheme : {model::PositionScheme::kLearnedAbsolute, model::PositionScheme::kRelativeBucket}) {
    for (bool tie : {true, false}) {
      auto p = Small(scheme, tie);
      RoundToStorage(p.tensors);
      optim::Optimizer opt({optim::Kind::kAdafactor, 0.01});
      TensorMap grads = p.tensors;
      opt.Step(p.tensors, grads, model::TrainableMask::All(p));
      RoundToStorage(p.tensors);
      TensorMap state = opt.ExportState();
      RoundToStorage(state);

      std::stringstream buf;
      Write(buf, p, state);
      const std::string bytes = buf.str();
      CHECK(bytes.substr(0, 4) == "SQFG");
      const Checkpoint back = Read(buf);
      CHECK(back.params.config == p.config);
      REQUIRE(back.params.tensors.size() == p.tensors.size());
      for (const auto& [name, t] : p.tensors) {
        CHECK(back.params.at(name).shape == t.shape);
        CHECK(back.params.at(name).data == t.data);
      }
      REQUIRE(back.optimizer_state.size() == state.size());
      for (const auto& [name, t] : state) CHECK(back.optimizer_state.at(name).data == t.data);
      std::stringstream again;
      Write(again, back.params, back.optimizer_state);
      CHECK(again.str() == bytes);
    }
  }
}

TEST_CASE("file save and load") {
  const auto dir = std::filesystem::temp_directory_path() / "dt5_checkpoint_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  auto p = Small(model::PositionScheme::kLearnedAbsolute, true);
  Save(path, p);
  CHECK(!std::filesystem::exists(path + ".tmp"));
  const Checkpoint back = Load(path);
  RoundToStorage(p.tensors);
  for (const auto& [name, t] : p.tensors) CHECK(back.params.at(name).data == t.data);
  CHECK_THROWS_AS(Load((dir / "missing.ckpt").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt input is rejected") {
  const auto p = Small(model::PositionScheme::kLearnedAbsolute, true);
  std::stringstream buf;
  Write(buf, p);
  std::string bytes = buf.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic);
  CHECK_THROWS_AS(Read(in1), Error);

  std::istringstream in2(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(Read(in2), Error);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::istringstream in3(bad_version);
  CHECK_THROWS_AS(Read(in3), Error);
}

}  // namespace
}  // namespace dt5::checkpoint
