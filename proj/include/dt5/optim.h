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

// Adafactor, AdamW and RAdam over named f64 tensors.

#include <cstdint>
#include <string>

#include "dt5/model.h"
#include "dt5/tensor.h"

namespace dt5::optim {

enum class Kind { kAdafactor, kAdamW, kRAdam };

Kind ParseKind(const std::string& name);
const char* KindName(Kind kind);

struct Options {
  Kind kind = Kind::kAdafactor;
  double lr = 1e-3;
  // Adam family.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // AdamW only
  // Adafactor.
  double decay_exponent = 0.8;  // second-moment decay 1 - t^-c
  double eps1 = 1e-30;          // added to squared gradients
  double clip_threshold = 1.0;  // RMS update clipping
};

// Per-tensor Adafactor state. Rank-2 tensors keep row and column statistics;
// everything else keeps a full second moment.
struct AdafactorSlot {
  bool factored = false;
  Tensor row;  // [rows]
  Tensor col;  // [cols]
  Tensor v;    // same shape as the parameter when not factored
};

struct AdamSlot {
  Tensor m;
  Tensor v;
};

AdafactorSlot MakeAdafactorSlot(const Tensor& param);
AdamSlot MakeAdamSlot(const Tensor& param);

// Single-tensor updates; step is the 1-based count after incrementing.
// Throw dt5::Error(kDivergence) on a non-finite gradient.
void AdafactorUpdate(Tensor& param, const Tensor& grad, AdafactorSlot& slot,
                     std::uint64_t step, const Options& opt);
void AdamWUpdate(Tensor& param, const Tensor& grad, AdamSlot& slot,
                 std::uint64_t step, const Options& opt);
void RAdamUpdate(Tensor& param, const Tensor& grad, AdamSlot& slot,
                 std::uint64_t step, const Options& opt);

// Length of the approximated simple moving average used by RAdam.
double RAdamRho(std::uint64_t step, double beta2);

class Optimizer {
 public:
  explicit Optimizer(Options options) : options_(options) {}

  // Updates every tensor present in grads that the mask marks trainable.
  // Frozen tensors are never touched.
  void Step(TensorMap& params, const TensorMap& grads,
            const model::TrainableMask& mask);

  std::uint64_t step() const { return step_; }
  const Options& options() const { return options_; }

  // State as named tensors under the "opt/" prefix, for checkpoints.
  TensorMap ExportState() const;
  void ImportState(const TensorMap& state);

  // Number of stored second-moment values for a parameter (test hook).
  std::size_t SecondMomentSize(const std::string& name) const;

 private:
  Options options_;
  std::uint64_t step_ = 0;
  std::map<std::string, AdafactorSlot> adafactor_;
  std::map<std::string, AdamSlot> adam_;
};

}  // namespace dt5::optim
