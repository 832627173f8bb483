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
#include "dt5/checkpoint.h"

#include <cstdio>
#include <fstream>

#include "dt5/binary_io.h"
#include "dt5/error.h"

namespace dt5::checkpoint {

namespace {

using binary_io::ReadF32;
using binary_io::ReadLE;
using binary_io::WriteF32;
using binary_io::WriteLE;

void WriteConfig(std::ostream& out, const model::ModelConfig& c) {
  for (std::uint32_t v : {c.vocab_size, c.d_model, c.n_heads, c.d_ff,
                          c.n_enc_layers, c.n_dec_layers, c.max_len}) {
    WriteLE<std::uint32_t>(out, v);
  }
  WriteLE<std::uint8_t>(out, static_cast<std::uint8_t>(c.position_scheme));
  WriteLE<std::uint8_t>(out, c.tie_embeddings ? 1 : 0);
  WriteLE<std::uint32_t>(out, c.num_buckets);
  WriteLE<std::uint32_t>(out, c.max_distance);
  WriteLE<std::int32_t>(out, c.decoder_start_id);
}

model::ModelConfig ReadConfig(std::istream& in) {
  model::ModelConfig c;
  c.vocab_size = ReadLE<std::uint32_t>(in);
  c.d_model = ReadLE<std::uint32_t>(in);
  c.n_heads = ReadLE<std::uint32_t>(in);
  c.d_ff = ReadLE<std::uint32_t>(in);
  c.n_enc_layers = ReadLE<std::uint32_t>(in);
  c.n_dec_layers = ReadLE<std::uint32_t>(in);
  c.max_len = ReadLE<std::uint32_t>(in);
  const auto scheme = ReadLE<std::uint8_t>(in);
  if (scheme > 1) ThrowData("unknown position scheme in checkpoint");
  c.position_scheme = static_cast<model::PositionScheme>(scheme);
  c.tie_embeddings = ReadLE<std::uint8_t>(in) != 0;
  c.num_buckets = ReadLE<std::uint32_t>(in);
  c.max_distance = ReadLE<std::uint32_t>(in);
  c.decoder_start_id = ReadLE<std::int32_t>(in);
  return c;
}

void WriteTensor(std::ostream& out, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) ThrowUsage("tensor name too long");
  WriteLE<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  WriteLE<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape) WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (double v : t.data) WriteF32(out, static_cast<float>(v));
}

}  // namespace

void Write(std::ostream& out, const model::ModelParams& params,
           const TensorMap& optimizer_state) {
  out.write("SQFG", 4);
  WriteLE<std::uint32_t>(out, kVersion);
  WriteConfig(out, params.config);
  // Both maps are sorted and the "opt/" names never collide with model names,
  // so merging keeps a global name order.
  TensorMap all;
  for (const auto& [name, t] : params.tensors) all.emplace(name, t);
  for (const auto& [name, t] : optimizer_state) {
    if (name.rfind("opt/", 0) != 0) ThrowUsage("optimizer tensor without opt/ prefix: " + name);
    all.emplace(name, t);
  }
  WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) WriteTensor(out, name, t);
  if (!out) ThrowData("failed writing checkpoint");
}

Checkpoint Read(std::istream& in) {
  binary_io::ExpectMagic(in, "SQFG");
  const auto version = ReadLE<std::uint32_t>(in);
  if (version != kVersion) ThrowData("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.params.config = ReadConfig(in);
  try {
    ck.params.config.Validate();
  } catch (const Error& e) {
    ThrowData(std::string("invalid checkpoint config: ") + e.what());
  }
  const auto count = ReadLE<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = ReadLE<std::uint16_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) ThrowData("truncated checkpoint");
    const auto rank = ReadLE<std::uint8_t>(in);
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = ReadLE<std::uint32_t>(in);
    Tensor t(dims);
    for (double& v : t.data) v = ReadF32(in);
    auto& target = name.rfind("opt/", 0) == 0 ? ck.optimizer_state : ck.params.tensors;
    if (!target.emplace(std::move(name), std::move(t)).second) {
      ThrowData("duplicate tensor in checkpoint");
    }
  }
  // Every tensor the config implies must be present with the right shape.
  const model::ModelParams shape_ref = model::InitModel(ck.params.config, 0);
  for (const auto& [name, t] : shape_ref.tensors) {
    auto it = ck.params.tensors.find(name);
    if (it == ck.params.tensors.end()) ThrowData("checkpoint is missing tensor " + name);
    if (it->second.shape != t.shape) ThrowData("checkpoint tensor has wrong shape: " + name);
  }
  if (ck.params.tensors.size() != shape_ref.tensors.size()) {
    ThrowData("checkpoint has unexpected tensors");
  }
  return ck;
}

void Save(const std::string& path, const model::ModelParams& params,
          const TensorMap& optimizer_state) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) ThrowData("cannot open " + tmp);
    Write(out, params, optimizer_state);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) ThrowData("cannot rename " + tmp);
}

Checkpoint Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot open checkpoint " + path);
  return Read(in);
}

void RoundToStorage(TensorMap& tensors) {
  for (auto& [name, t] : tensors) {
    for (double& v : t.data) v = static_cast<float>(v);
  }
}

}  // namespace dt5::checkpoint
