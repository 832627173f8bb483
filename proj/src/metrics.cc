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
#include "dt5/metrics.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <vector>

#include "dt5/error.h"

namespace dt5::metrics {

namespace {

template <typename T>
void CheckLengths(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) ThrowData("length mismatch");
  if (a.empty()) ThrowData("empty input");
}

void CheckLabels(std::span<const int> labels, int num_classes) {
  for (int l : labels) {
    if (l < 0 || l >= num_classes) ThrowData("label outside the class set");
  }
}

// Sum of non-negative fractions kept exact while it fits in 64 bits, so the
// final division rounds once. Falls back to long double on overflow.
class FractionSum {
 public:
  void Add(std::uint64_t num, std::uint64_t den) {
    approx_ += static_cast<long double>(num) / static_cast<long double>(den);
    if (!exact_) return;
    std::uint64_t a = 0, b = 0, d = 0;
    if (__builtin_mul_overflow(num_, den, &a) || __builtin_mul_overflow(num, den_, &b) ||
        __builtin_add_overflow(a, b, &num_) || __builtin_mul_overflow(den_, den, &d)) {
      exact_ = false;
      return;
    }
    den_ = d;
    const std::uint64_t g = std::gcd(num_, den_);
    num_ /= g;
    den_ /= g;
  }

  double DividedBy(std::uint64_t k) const {
    std::uint64_t d = 0;
    if (exact_ && !__builtin_mul_overflow(den_, k, &d) && num_ < (std::uint64_t{1} << 53) &&
        d < (std::uint64_t{1} << 53)) {
      return static_cast<double>(num_) / static_cast<double>(d);
    }
    return static_cast<double>(approx_ / static_cast<long double>(k));
  }

 private:
  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
  long double approx_ = 0.0L;
  bool exact_ = true;
};

}  // namespace

double Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) ThrowData("length mismatch");
  if (x.size() < 2) ThrowData("pearson needs at least two points");
  // Extended precision keeps the result within rounding of the exact value
  // for ordinary inputs.
  const auto n = static_cast<long double>(x.size());
  long double mx = 0.0L, my = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0L || syy == 0.0L) ThrowData("zero variance");
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

double Mse(std::span<const double> pred, std::span<const double> gold) {
  CheckLengths(pred, gold);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

double Accuracy(std::span<const int> pred, std::span<const int> gold) {
  CheckLengths(pred, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

F1Result AverageF1(std::span<const int> pred, std::span<const int> gold,
                   int num_classes, F1Average average) {
  CheckLengths(pred, gold);
  CheckLabels(pred, num_classes);
  CheckLabels(gold, num_classes);
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(k, 0), n_pred(k, 0), n_gold(k, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++n_pred[pred[i]];
    ++n_gold[gold[i]];
    if (pred[i] == gold[i]) ++tp[pred[i]];
  }
  F1Result r;
  FractionSum total;
  for (std::size_t c = 0; c < k; ++c) {
    if (n_pred[c] + n_gold[c] == 0) {
      r.absent_class = true;
      continue;
    }
    const std::uint64_t num = 2 * tp[c] * (average == F1Average::kMacro ? 1 : n_gold[c]);
    total.Add(num, n_pred[c] + n_gold[c]);
  }
  r.value = total.DividedBy(average == F1Average::kMacro ? k : gold.size());
  return r;
}

double MacroF1(std::span<const int> pred, std::span<const int> gold, int num_classes) {
  return AverageF1(pred, gold, num_classes, F1Average::kMacro).value;
}

RegressionReport EvaluateRegression(std::span<const double> pred,
                                    std::span<const double> gold) {
  return {Pearson(pred, gold), Mse(pred, gold), pred.size()};
}

ClassificationReport EvaluateClassification(std::span<const int> pred,
                                            std::span<const int> gold,
                                            F1Average average) {
  ClassificationReport r;
  r.accuracy = Accuracy(pred, gold);
  r.f1 = AverageF1(pred, gold, 2, average).value;
  for (std::size_t i = 0; i < pred.size(); ++i) ++r.confusion[gold[i]][pred[i]];
  r.n = pred.size();
  return r;
}

void WriteReport(const RegressionReport& r, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "n=%zu\npearson=%.6f\nmse=%.6f\n", r.n, r.pearson, r.mse);
  out << buf;
}

void WriteReport(const ClassificationReport& r, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "n=%zu\naccuracy=%.6f\nf1=%.6f\n"
                "confusion.entail.entail=%zu\nconfusion.entail.none=%zu\n"
                "confusion.none.entail=%zu\nconfusion.none.none=%zu\n",
                r.n, r.accuracy, r.f1, r.confusion[0][0], r.confusion[0][1],
                r.confusion[1][0], r.confusion[1][1]);
  out << buf;
}

void WriteRow(const RegressionReport* reg, const ClassificationReport* cls,
              std::ostream& out) {
  auto cell = [&](bool present, double v) {
    if (!present) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  out << "pearson\tmse\taccuracy\tf1\n"
      << cell(reg, reg ? reg->pearson : 0) << '\t' << cell(reg, reg ? reg->mse : 0)
      << '\t' << cell(cls, cls ? cls->accuracy : 0) << '\t'
      << cell(cls, cls ? cls->f1 : 0) << '\n';
}

}  // namespace dt5::metrics
