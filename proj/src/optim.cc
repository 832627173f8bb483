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
#include "dt5/optim.h"

#include <cmath>

#include "dt5/error.h"

namespace dt5::optim {

namespace {

void CheckFinite(const Tensor& grad) {
  for (double g : grad.data) {
    if (!std::isfinite(g)) ThrowDiverged("diverged");
  }
}

void CheckShape(const Tensor& param, const Tensor& grad) {
  if (param.shape != grad.shape) ThrowUsage("gradient shape does not match parameter");
}

}  // namespace

Kind ParseKind(const std::string& name) {
  if (name == "adafactor") return Kind::kAdafactor;
  if (name == "adamw") return Kind::kAdamW;
  if (name == "radam") return Kind::kRAdam;
  ThrowUsage("unknown optimizer: " + name);
}

const char* KindName(Kind kind) {
  switch (kind) {
    case Kind::kAdafactor: return "adafactor";
    case Kind::kAdamW: return "adamw";
    case Kind::kRAdam: return "radam";
  }
  return "?";
}

AdafactorSlot MakeAdafactorSlot(const Tensor& param) {
  AdafactorSlot slot;
  slot.factored = param.rank() == 2;
  if (slot.factored) {
    slot.row = Tensor({param.rows()});
    slot.col = Tensor({param.cols()});
  } else {
    slot.v = Tensor(param.shape);
  }
  return slot;
}

AdamSlot MakeAdamSlot(const Tensor& param) {
  return {Tensor(param.shape), Tensor(param.shape)};
}

void AdafactorUpdate(Tensor& param, const Tensor& grad, AdafactorSlot& slot,
                     std::uint64_t step, const Options& opt) {
  CheckShape(param, grad);
  CheckFinite(grad);
  const double beta2 = 1.0 - std::pow(static_cast<double>(step), -opt.decay_exponent);
  const std::size_t n = param.size();
  std::vector<double> update(n);
  if (slot.factored) {
    const std::size_t rows = param.rows();
    const std::size_t cols = param.cols();
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = grad.data[r * cols + c];
        const double sq = g * g + opt.eps1;
        row_sum[r] += sq;
        col_sum[c] += sq;
      }
    }
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      slot.row.data[r] = beta2 * slot.row.data[r] + (1.0 - beta2) * row_sum[r];
      total += slot.row.data[r];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      slot.col.data[c] = beta2 * slot.col.data[c] + (1.0 - beta2) * col_sum[c];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = slot.row.data[r] * slot.col.data[c] / total;
        update[r * cols + c] = grad.data[r * cols + c] / std::sqrt(v);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad.data[i];
      slot.v.data[i] = beta2 * slot.v.data[i] + (1.0 - beta2) * (g * g + opt.eps1);
      update[i] = g / std::sqrt(slot.v.data[i]);
    }
  }
  double ms = 0.0;
  for (double u : update) ms += u * u;
  const double rms = std::sqrt(ms / static_cast<double>(n));
  const double scale = opt.lr / std::max(1.0, rms / opt.clip_threshold);
  for (std::size_t i = 0; i < n; ++i) param.data[i] -= scale * update[i];
}

void AdamWUpdate(Tensor& param, const Tensor& grad, AdamSlot& slot,
                 std::uint64_t step, const Options& opt) {
  CheckShape(param, grad);
  CheckFinite(grad);
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    double& m = slot.m.data[i];
    double& v = slot.v.data[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
    double& p = param.data[i];
    p -= opt.lr * opt.weight_decay * p;
    p -= opt.lr * (m / c1) / (std::sqrt(v / c2) + opt.eps);
  }
}

double RAdamRho(std::uint64_t step, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double bt = std::pow(beta2, static_cast<double>(step));
  return rho_inf - 2.0 * static_cast<double>(step) * bt / (1.0 - bt);
}

void RAdamUpdate(Tensor& param, const Tensor& grad, AdamSlot& slot,
                 std::uint64_t step, const Options& opt) {
  CheckShape(param, grad);
  CheckFinite(grad);
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  const double rho_inf = 2.0 / (1.0 - opt.beta2) - 1.0;
  const double rho = RAdamRho(step, opt.beta2);
  const bool rectify = rho > 4.0;
  double r = 0.0;
  if (rectify) {
    r = std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf /
                  ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data[i];
    double& m = slot.m.data[i];
    double& v = slot.v.data[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
    const double m_hat = m / c1;
    if (rectify) {
      param.data[i] -= opt.lr * r * m_hat / (std::sqrt(v / c2) + opt.eps);
    } else {
      param.data[i] -= opt.lr * m_hat;
    }
  }
}

void Optimizer::Step(TensorMap& params, const TensorMap& grads,
                     const model::TrainableMask& mask) {
  // Validate everything first so a bad gradient leaves params untouched.
  for (const auto& [name, g] : grads) {
    if (!mask.Contains(name)) continue;
    auto it = params.find(name);
    if (it == params.end()) ThrowUsage("gradient for unknown tensor " + name);
    CheckShape(it->second, g);
    CheckFinite(g);
  }
  ++step_;
  for (const auto& [name, g] : grads) {
    if (!mask.Contains(name)) continue;
    Tensor& p = params.at(name);
    switch (options_.kind) {
      case Kind::kAdafactor: {
        auto it = adafactor_.find(name);
        if (it == adafactor_.end()) it = adafactor_.emplace(name, MakeAdafactorSlot(p)).first;
        AdafactorUpdate(p, g, it->second, step_, options_);
        break;
      }
      case Kind::kAdamW:
      case Kind::kRAdam: {
        auto it = adam_.find(name);
        if (it == adam_.end()) it = adam_.emplace(name, MakeAdamSlot(p)).first;
        if (options_.kind == Kind::kAdamW) {
          AdamWUpdate(p, g, it->second, step_, options_);
        } else {
          RAdamUpdate(p, g, it->second, step_, options_);
        }
        break;
      }
    }
  }
}

TensorMap Optimizer::ExportState() const {
  TensorMap out;
  Tensor step({1});
  step.data[0] = static_cast<double>(step_);
  out["opt/step"] = step;
  for (const auto& [name, slot] : adafactor_) {
    if (slot.factored) {
      out["opt/" + name + "/row"] = slot.row;
      out["opt/" + name + "/col"] = slot.col;
    } else {
      out["opt/" + name + "/v"] = slot.v;
    }
  }
  for (const auto& [name, slot] : adam_) {
    out["opt/" + name + "/m"] = slot.m;
    out["opt/" + name + "/v"] = slot.v;
  }
  return out;
}

void Optimizer::ImportState(const TensorMap& state) {
  adafactor_.clear();
  adam_.clear();
  step_ = 0;
  auto it = state.find("opt/step");
  if (it == state.end()) return;
  step_ = static_cast<std::uint64_t>(it->second.data.at(0));
  auto suffixed = [](const std::string& key, const std::string& suffix,
                     std::string& base) {
    if (key.size() <= 4 + suffix.size() || key.compare(0, 4, "opt/") != 0) return false;
    if (key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
    base = key.substr(4, key.size() - 4 - suffix.size());
    return true;
  };
  for (const auto& [key, t] : state) {
    std::string base;
    if (options_.kind == Kind::kAdafactor) {
      if (suffixed(key, "/row", base)) {
        adafactor_[base].factored = true;
        adafactor_[base].row = t;
      } else if (suffixed(key, "/col", base)) {
        adafactor_[base].factored = true;
        adafactor_[base].col = t;
      } else if (suffixed(key, "/v", base)) {
        adafactor_[base].v = t;
      }
    } else {
      if (suffixed(key, "/m", base)) {
        adam_[base].m = t;
      } else if (suffixed(key, "/v", base)) {
        adam_[base].v = t;
      }
    }
  }
}

std::size_t Optimizer::SecondMomentSize(const std::string& name) const {
  if (auto it = adafactor_.find(name); it != adafactor_.end()) {
    return it->second.factored ? it->second.row.size() + it->second.col.size()
                               : it->second.v.size();
  }
  if (auto it = adam_.find(name); it != adam_.end()) return it->second.v.size();
  return 0;
}

}  // namespace dt5::optim
