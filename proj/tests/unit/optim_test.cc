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

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "dt5/error.h"
#include "dt5/optim.h"
#include "dt5/rng.h"

namespace dt5::optim {
namespace {

Tensor Make(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t(std::move(shape));
  t.data = std::move(data);
  return t;
}

Options With(Kind kind, double lr) {
  Options o;
  o.kind = kind;
  o.lr = lr;
  return o;
}

std::vector<double> AdamGrad(int t) {
  return {std::sin(1.0 + t), std::cos(0.5 * t) * 0.3, 0.01 * (t - 3)};
}

// Expected values below come from tests/oracles/reference_values.py.

TEST_CASE("adafactor 2x2 trace") {
  Tensor w = Make({2, 2}, {0.5, -0.3, 0.2, 0.8});
  const std::vector<std::vector<double>> grads = {
      {0.1, -0.2, 0.3, 0.05}, {-0.05, 0.4, 0.1, -0.3}, {0.2, 0.1, -0.1, 0.2}};
  AdafactorSlot slot = MakeAdafactorSlot(w);
  const Options o = With(Kind::kAdafactor, 0.01);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    AdafactorUpdate(w, Make({2, 2}, grads[t]), slot, t + 1, o);
  }
  const std::vector<double> expected = {0.48569353260659459, -0.30201309539558657,
                                        0.18874707244156902, 0.7995648806665232};
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w.data[i] - expected[i]) < 1e-12);
  CHECK(std::abs(slot.row.data[0] - 0.087783612197859698) < 1e-12);
  CHECK(std::abs(slot.row.data[1] - 0.077371052501970822) < 1e-12);
  CHECK(std::abs(slot.col.data[0] - 0.04985056374140609) < 1e-12);
  CHECK(std::abs(slot.col.data[1] - 0.11530410095842443) < 1e-12);
}

TEST_CASE("adafactor vector trace") {
  Tensor w = Make({3}, {1.0, -2.0, 0.5});
  AdafactorSlot slot = MakeAdafactorSlot(w);
  CHECK(!slot.factored);
  const Options o = With(Kind::kAdafactor, 0.01);
  AdafactorUpdate(w, Make({3}, {0.3, -0.1, 0.0}), slot, 1, o);
  AdafactorUpdate(w, Make({3}, {0.2, 0.4, -0.5}), slot, 2, o);
  const std::vector<double> expected = {0.98305336105026775, -2.0010915717711595,
                                        0.51134553845999753};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(w.data[i] - expected[i]) < 1e-12);
}

TEST_CASE("adafactor factorization is exact for rank-1 second moments") {
  const std::vector<double> u = {0.3, -1.2, 2.0}, v = {0.5, 0.1, -0.7, 1.5};
  Tensor g({3, 4});
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) g.data[r * 4 + c] = u[r] * v[c];
  }
  Tensor w({3, 4});
  AdafactorSlot slot = MakeAdafactorSlot(w);
  AdafactorUpdate(w, g, slot, 1, With(Kind::kAdafactor, 0.01));
  double total = 0.0;
  for (double x : slot.row.data) total += x;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double est = slot.row.data[r] * slot.col.data[c] / total;
      const double sq = g.data[r * 4 + c] * g.data[r * 4 + c];
      CHECK(est == doctest::Approx(sq).epsilon(1e-12));
    }
  }
}

TEST_CASE("adafactor scalar with constant gradient steps by lr") {
  Tensor w = Make({}, {1.0});
  AdafactorSlot slot = MakeAdafactorSlot(w);
  const Options o = With(Kind::kAdafactor, 0.003);
  for (std::uint64_t t = 1; t <= 50; ++t) {
    const double before = w.data[0];
    AdafactorUpdate(w, Make({}, {0.7}), slot, t, o);
    CHECK(before - w.data[0] == doctest::Approx(0.003).epsilon(1e-9));
  }
}

TEST_CASE("adamw trace and limits") {
  Tensor p = Make({3}, {0.5, -1.0, 2.0});
  AdamSlot slot = MakeAdamSlot(p);
  Options o = With(Kind::kAdamW, 0.01);
  o.weight_decay = 0.01;
  for (int t = 1; t <= 5; ++t) AdamWUpdate(p, Make({3}, AdamGrad(t)), slot, t, o);
  const std::vector<double> expected = {0.48841060713939072, -1.0301415121754554,
                                        2.0270480892662563};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.data[i] - expected[i]) < 1e-12);

  Tensor q = Make({2}, {1.0, 1.0});
  AdamSlot s2 = MakeAdamSlot(q);
  o.weight_decay = 0.0;
  AdamWUpdate(q, Make({2}, {3.0, -0.5}), s2, 1, o);
  CHECK(q.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
  CHECK(q.data[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-9));

  Tensor z = Make({2}, {0.25, -4.0});
  AdamSlot s3 = MakeAdamSlot(z);
  for (int t = 1; t <= 3; ++t) AdamWUpdate(z, Make({2}, {0.0, 0.0}), s3, t, o);
  CHECK(z.data == std::vector<double>{0.25, -4.0});
}

TEST_CASE("radam trace and rectification threshold") {
  Tensor p = Make({3}, {0.5, -1.0, 2.0});
  AdamSlot slot = MakeAdamSlot(p);
  const Options o = With(Kind::kRAdam, 0.01);
  for (int t = 1; t <= 10; ++t) RAdamUpdate(p, Make({3}, AdamGrad(t)), slot, t, o);
  const std::vector<double> expected = {0.48791756832117461, -1.0058116493036964,
                                        1.9990442297724511};
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p.data[i] - expected[i]) < 1e-12);

  for (std::uint64_t t = 1; t <= 4; ++t) CHECK(RAdamRho(t, 0.999) <= 4.0);
  CHECK(RAdamRho(5, 0.999) > 4.0);

  // t = 1: plain momentum step lr * g.
  Tensor q = Make({1}, {1.0});
  AdamSlot s = MakeAdamSlot(q);
  RAdamUpdate(q, Make({1}, {0.2}), s, 1, o);
  CHECK(q.data[0] == doctest::Approx(1.0 - 0.01 * 0.2).epsilon(1e-15));

  // Late steps approach the unrectified Adam step.
  Tensor a = Make({1}, {1.0}), b = Make({1}, {1.0});
  AdamSlot sa = MakeAdamSlot(a), sb = MakeAdamSlot(b);
  sa.m.data[0] = sb.m.data[0] = 0.1;
  sa.v.data[0] = sb.v.data[0] = 0.02;
  Options adam = With(Kind::kAdamW, 0.01);
  RAdamUpdate(a, Make({1}, {0.1}), sa, 200000, o);
  AdamWUpdate(b, Make({1}, {0.1}), sb, 200000, adam);
  CHECK((1.0 - a.data[0]) == doctest::Approx(1.0 - b.data[0]).epsilon(1e-3));
}

TEST_CASE("non-finite gradients diverge without touching parameters") {
  for (Kind k : {Kind::kAdafactor, Kind::kAdamW, Kind::kRAdam}) {
    Optimizer opt(With(k, 0.01));
    TensorMap params = {{"a", Make({2}, {1.0, 2.0})}, {"b", Make({1}, {3.0})}};
    const TensorMap before = params;
    TensorMap grads = {{"a", Make({2}, {0.1, 0.2})},
                       {"b", Make({1}, {std::numeric_limits<double>::quiet_NaN()})}};
    const auto mask = model::TrainableMask::Of({"a", "b"});
    try {
      opt.Step(params, grads, mask);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDivergence);
    }
    CHECK(params.at("a").data == before.at("a").data);
    CHECK(opt.step() == 0);
  }
}

TEST_CASE("mask, memory and state round trip") {
  for (Kind k : {Kind::kAdafactor, Kind::kAdamW, Kind::kRAdam}) {
    CAPTURE(KindName(k));
    Optimizer opt(With(k, 0.01));
    Xoshiro256 rng(5);
    TensorMap params = {{"m", Tensor({5, 7})}, {"frozen", Tensor({3})}};
    for (auto& [n, t] : params) for (double& x : t.data) x = rng.Normal();
    const TensorMap init = params;
    TensorMap grads = params;
    const auto mask = model::TrainableMask::Of({"m"});
    opt.Step(params, grads, mask);
    CHECK(params.at("frozen").data == init.at("frozen").data);
    CHECK(params.at("m").data != init.at("m").data);
    CHECK(opt.step() == 1);
    if (k == Kind::kAdafactor) {
      CHECK(opt.SecondMomentSize("m") == 5 + 7);
    } else {
      CHECK(opt.SecondMomentSize("m") == 35);
    }
    CHECK(opt.SecondMomentSize("frozen") == 0);

    Optimizer copy(With(k, 0.01));
    copy.ImportState(opt.ExportState());
    CHECK(copy.step() == 1);
    for (const auto& [name, t] : opt.ExportState()) CHECK(name.rfind("opt/", 0) == 0);
    TensorMap p1 = params, p2 = params;
    opt.Step(p1, grads, mask);
    copy.Step(p2, grads, mask);
    CHECK(p1.at("m").data == p2.at("m").data);
    CHECK(ParseKind(KindName(k)) == k);
  }
  CHECK_THROWS_AS(ParseKind("sgd"), Error);
}

TEST_CASE("convex quadratic decreases monotonically after burn-in") {
  for (Kind k : {Kind::kAdafactor, Kind::kAdamW, Kind::kRAdam}) {
    CAPTURE(KindName(k));
    Optimizer opt(With(k, 0.01));
    TensorMap params = {{"x", Tensor({3, 4})}};
    std::vector<double> a(12);
    for (std::size_t i = 0; i < 12; ++i) {
      params.at("x").data[i] = 2.0 + 0.25 * static_cast<double>(i);
      a[i] = 0.5 + 0.1 * static_cast<double>(i);
    }
    auto loss = [&]() {
      double f = 0.0;
      for (std::size_t i = 0; i < 12; ++i) f += 0.5 * a[i] * params.at("x").data[i] * params.at("x").data[i];
      return f;
    };
    const auto mask = model::TrainableMask::Of({"x"});
    double prev = loss();
    for (int step = 1; step <= 150; ++step) {
      TensorMap g = {{"x", Tensor({3, 4})}};
      for (std::size_t i = 0; i < 12; ++i) g.at("x").data[i] = a[i] * params.at("x").data[i];
      opt.Step(params, g, mask);
      const double f = loss();
      if (step > 10) CHECK(f < prev);
      prev = f;
    }
  }
}

}  // namespace
}  // namespace dt5::optim
