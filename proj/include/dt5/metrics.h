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

// Regression and binary classification metrics.

#include <array>
#include <ostream>
#include <span>

namespace dt5::metrics {

// Sample Pearson correlation. Throws kData on length mismatch, fewer than two
// points or a constant vector ("zero variance").
double Pearson(std::span<const double> x, std::span<const double> y);
double Mse(std::span<const double> pred, std::span<const double> gold);
double Accuracy(std::span<const int> pred, std::span<const int> gold);

enum class F1Average { kMacro, kWeighted };

struct F1Result {
  double value = 0.0;
  bool absent_class = false;  // some class never occurs in gold or pred
};

// Labels are class indices in [0, num_classes).
F1Result AverageF1(std::span<const int> pred, std::span<const int> gold,
                   int num_classes = 2, F1Average average = F1Average::kMacro);
double MacroF1(std::span<const int> pred, std::span<const int> gold,
               int num_classes = 2);

struct RegressionReport {
  double pearson = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
};

struct ClassificationReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [gold][pred]
  std::size_t n = 0;
};

RegressionReport EvaluateRegression(std::span<const double> pred,
                                    std::span<const double> gold);
ClassificationReport EvaluateClassification(std::span<const int> pred,
                                            std::span<const int> gold,
                                            F1Average average = F1Average::kMacro);

// key=value lines.
void WriteReport(const RegressionReport& r, std::ostream& out);
void WriteReport(const ClassificationReport& r, std::ostream& out);
// Header plus one tab-separated row: pearson, mse, accuracy, f1. Metrics not
// computed for the task are written as "-".
void WriteRow(const RegressionReport* reg, const ClassificationReport* cls,
              std::ostream& out);

}  // namespace dt5::metrics
