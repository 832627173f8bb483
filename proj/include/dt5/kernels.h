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

// Dense f64 kernels used by the model. Every kernel has a scalar reference
// implementation; SIMD variants (AVX2+FMA on x86-64, NEON on AArch64) are
// picked at runtime when the CPU supports them. All variants agree with the
// scalar reference to rounding (summation order differs).

#include <cstddef>
#include <string_view>

namespace dt5::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  Backend backend;
  const char* name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // c[m x n] += a[m x k] * b[n x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // c[m x n] += a[k x m]^T * b[k x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
};

const KernelTable& ScalarTable();
// Null when the variant was not compiled in.
const KernelTable* Avx2Table();
const KernelTable* NeonTable();

bool Supported(Backend backend);

// Best supported backend, unless overridden by SetBackend or by the
// DT5_KERNELS environment variable ("scalar", "avx2", "neon").
const KernelTable& Active();
void SetBackend(Backend backend);
Backend ParseBackend(std::string_view name);

inline double Dot(const double* x, const double* y, std::size_t n) {
  return Active().dot(x, y, n);
}
inline void Axpy(double a, const double* x, double* y, std::size_t n) {
  Active().axpy(a, x, y, n);
}
inline void GemmNN(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  Active().gemm_nn(a, b, c, m, k, n);
}
inline void GemmNT(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  Active().gemm_nt(a, b, c, m, k, n);
}
inline void GemmTN(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  Active().gemm_tn(a, b, c, m, k, n);
}

}  // namespace dt5::kernels
