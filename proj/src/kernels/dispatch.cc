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
#include <atomic>
#include <cstdlib>
#include <string>

#include "dt5/error.h"
#include "dt5/kernels.h"

namespace dt5::kernels {

#if !defined(DT5_HAVE_AVX2)
const KernelTable* Avx2Table() { return nullptr; }
#endif
#if !defined(DT5_HAVE_NEON)
const KernelTable* NeonTable() { return nullptr; }
#endif

namespace {

const KernelTable* TableFor(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return &ScalarTable();
    case Backend::kAvx2:
      return Avx2Table();
    case Backend::kNeon:
      return NeonTable();
  }
  return nullptr;
}

const KernelTable* DetectBest() {
  if (const char* env = std::getenv("DT5_KERNELS"); env != nullptr && *env) {
    const Backend requested = ParseBackend(env);
    if (!Supported(requested)) {
      ThrowUsage(std::string("DT5_KERNELS backend not supported here: ") + env);
    }
    return TableFor(requested);
  }
  if (Supported(Backend::kAvx2)) return Avx2Table();
  if (Supported(Backend::kNeon)) return NeonTable();
  return &ScalarTable();
}

std::atomic<const KernelTable*>& Slot() {
  static std::atomic<const KernelTable*> slot{DetectBest()};
  return slot;
}

}  // namespace

bool Supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(DT5_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(DT5_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& Active() { return *Slot().load(std::memory_order_relaxed); }

void SetBackend(Backend backend) {
  if (!Supported(backend)) ThrowUsage("kernel backend not supported on this CPU");
  Slot().store(TableFor(backend), std::memory_order_relaxed);
}

Backend ParseBackend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  ThrowUsage("unknown kernel backend: " + std::string(name));
}

}  // namespace dt5::kernels
