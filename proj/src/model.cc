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
#include "dt5/model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dt5/error.h"
#include "dt5/kernels.h"
#include "dt5/rng.h"

namespace dt5::model {

namespace {

constexpr double kNormEps = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string LayerName(const char* stack, std::uint32_t i) {
  return std::string(stack) + "/layer_" + std::to_string(i);
}

// ---------------------------------------------------------------------------
// Building blocks. Backward functions accumulate into their outputs.

struct NormCache {
  Matrix x;
  std::vector<double> inv_rms;
};

Matrix RmsNormForward(const Matrix& x, const double* gain, NormCache& cache) {
  Matrix y(x.rows, x.cols);
  cache.x = x;
  cache.inv_rms.resize(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double ms = kernels::Dot(xr, xr, x.cols) / static_cast<double>(x.cols);
    const double inv = 1.0 / std::sqrt(ms + kNormEps);
    cache.inv_rms[r] = inv;
    double* yr = y.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) yr[c] = gain[c] * xr[c] * inv;
  }
  return y;
}

void RmsNormBackward(const NormCache& cache, const double* gain,
                     const Matrix& dy, Matrix& dx, double* dgain) {
  const std::size_t d = cache.x.cols;
  std::vector<double> gdy(d);
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* xr = cache.x.row(r);
    const double* dyr = dy.row(r);
    const double inv = cache.inv_rms[r];
    if (dgain) {
      for (std::size_t c = 0; c < d; ++c) dgain[c] += dyr[c] * xr[c] * inv;
    }
    for (std::size_t c = 0; c < d; ++c) gdy[c] = gain[c] * dyr[c];
    const double proj = kernels::Dot(gdy.data(), xr, d);
    const double coeff = proj * inv * inv * inv / static_cast<double>(d);
    double* dxr = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) dxr[c] += gdy[c] * inv - xr[c] * coeff;
  }
}

// y = x W, W stored [in x out].
Matrix Linear(const Matrix& x, const Tensor& w) {
  Matrix y(x.rows, w.cols());
  kernels::GemmNN(x.data.data(), w.data.data(), y.data.data(), x.rows, w.rows(),
                  w.cols());
  return y;
}

void LinearBackward(const Matrix& x, const Tensor& w, const Matrix& dy,
                    Matrix* dx, Tensor* dw) {
  if (dx) {
    kernels::GemmNT(dy.data.data(), w.data.data(), dx->data.data(), dy.rows,
                    w.cols(), w.rows());
  }
  if (dw) {
    kernels::GemmTN(x.data.data(), dy.data.data(), dw->data.data(), w.rows(),
                    x.rows, w.cols());
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double Gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double GeluGrad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

struct AttentionWeights {
  const Tensor* q;
  const Tensor* k;
  const Tensor* v;
  const Tensor* o;
};

struct AttentionGrads {
  Tensor* q = nullptr;
  Tensor* k = nullptr;
  Tensor* v = nullptr;
  Tensor* o = nullptr;
};

// Relative position bias for one attention call: per (query, key) bucket
// index into a [buckets x heads] table.
struct RelativeBias {
  const Tensor* table = nullptr;
  Tensor* grad = nullptr;
  std::vector<std::uint32_t> buckets;  // Tq x Tk
};

struct AttentionCache {
  Matrix hq;
  Matrix hkv;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, Tq x Tk
  Matrix context;
};

Matrix AttentionForward(const AttentionWeights& w, const Matrix& hq,
                        const Matrix& hkv, const std::vector<bool>& key_valid,
                        bool causal, const RelativeBias* bias,
                        std::uint32_t n_heads, AttentionCache& cache) {
  const std::size_t tq = hq.rows;
  const std::size_t tk = hkv.rows;
  const std::size_t d = hq.cols;
  const std::size_t dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.hq = hq;
  cache.hkv = hkv;
  cache.q = Linear(hq, *w.q);
  cache.k = Linear(hkv, *w.k);
  cache.v = Linear(hkv, *w.v);
  cache.probs.assign(n_heads, Matrix(tq, tk));
  cache.context = Matrix(tq, d);
  std::vector<double> scores(tk);
  for (std::uint32_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < tq; ++i) {
      double mx = kNegInf;
      for (std::size_t j = 0; j < tk; ++j) {
        if (!key_valid[j] || (causal && j > i)) {
          scores[j] = kNegInf;
          continue;
        }
        double s = kernels::Dot(cache.q.row(i) + off, cache.k.row(j) + off, dh) * scale;
        if (bias) s += bias->table->row(bias->buckets[i * tk + j])[h];
        scores[j] = s;
        mx = std::max(mx, s);
      }
      double* pr = p.row(i);
      if (mx == kNegInf) continue;  // no visible key: zero output
      double sum = 0.0;
      for (std::size_t j = 0; j < tk; ++j) {
        pr[j] = scores[j] == kNegInf ? 0.0 : std::exp(scores[j] - mx);
        sum += pr[j];
      }
      const double inv = 1.0 / sum;
      double* ctx = cache.context.row(i) + off;
      for (std::size_t j = 0; j < tk; ++j) {
        pr[j] *= inv;
        if (pr[j] != 0.0) kernels::Axpy(pr[j], cache.v.row(j) + off, ctx, dh);
      }
    }
  }
  return Linear(cache.context, *w.o);
}

void AttentionBackward(const AttentionWeights& w, const AttentionCache& cache,
                       const Matrix& d_out, std::uint32_t n_heads,
                       RelativeBias* bias, Matrix& d_hq, Matrix& d_hkv,
                       const AttentionGrads& g) {
  const std::size_t tq = cache.hq.rows;
  const std::size_t tk = cache.hkv.rows;
  const std::size_t d = cache.hq.cols;
  const std::size_t dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix d_ctx(tq, d);
  LinearBackward(cache.context, *w.o, d_out, &d_ctx, g.o);

  Matrix dq(tq, d), dk(tk, d), dv(tk, d);
  std::vector<double> dp(tk);
  for (std::uint32_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < tq; ++i) {
      const double* pr = p.row(i);
      const double* dci = d_ctx.row(i) + off;
      double dot_pdp = 0.0;
      for (std::size_t j = 0; j < tk; ++j) {
        if (pr[j] == 0.0) {
          dp[j] = 0.0;
          continue;
        }
        dp[j] = kernels::Dot(dci, cache.v.row(j) + off, dh);
        kernels::Axpy(pr[j], dci, dv.row(j) + off, dh);
        dot_pdp += pr[j] * dp[j];
      }
      for (std::size_t j = 0; j < tk; ++j) {
        if (pr[j] == 0.0) continue;
        const double ds = pr[j] * (dp[j] - dot_pdp);
        if (bias && bias->grad) bias->grad->row(bias->buckets[i * tk + j])[h] += ds;
        kernels::Axpy(ds * scale, cache.k.row(j) + off, dq.row(i) + off, dh);
        kernels::Axpy(ds * scale, cache.q.row(i) + off, dk.row(j) + off, dh);
      }
    }
  }
  LinearBackward(cache.hq, *w.q, dq, &d_hq, g.q);
  LinearBackward(cache.hkv, *w.k, dk, &d_hkv, g.k);
  LinearBackward(cache.hkv, *w.v, dv, &d_hkv, g.v);
}

struct FeedForwardCache {
  Matrix h;
  Matrix pre;
  Matrix act;
};

Matrix FeedForwardForward(const Tensor& wi, const Tensor& wo, const Matrix& h,
                          FeedForwardCache& cache) {
  cache.h = h;
  cache.pre = Linear(h, wi);
  cache.act = Matrix(cache.pre.rows, cache.pre.cols);
  for (std::size_t i = 0; i < cache.pre.data.size(); ++i) {
    cache.act.data[i] = Gelu(cache.pre.data[i]);
  }
  return Linear(cache.act, wo);
}

void FeedForwardBackward(const Tensor& wi, const Tensor& wo,
                         const FeedForwardCache& cache, const Matrix& d_out,
                         Matrix& d_h, Tensor* d_wi, Tensor* d_wo) {
  Matrix d_act(cache.act.rows, cache.act.cols);
  LinearBackward(cache.act, wo, d_out, &d_act, d_wo);
  for (std::size_t i = 0; i < d_act.data.size(); ++i) {
    d_act.data[i] *= GeluGrad(cache.pre.data[i]);
  }
  LinearBackward(cache.h, wi, d_act, &d_h, d_wi);
}

// T5-style bucketing of (key - query) offsets.
std::uint32_t RelativeBucket(long relative, bool bidirectional,
                             std::uint32_t num_buckets,
                             std::uint32_t max_distance) {
  std::uint32_t ret = 0;
  long n = -relative;
  if (bidirectional) {
    num_buckets /= 2;
    if (n < 0) ret += num_buckets;
    n = std::labs(n);
  } else {
    n = std::max(n, 0L);
  }
  const std::uint32_t max_exact = num_buckets / 2;
  if (n < static_cast<long>(max_exact)) return ret + static_cast<std::uint32_t>(n);
  const double large =
      max_exact + std::log(static_cast<double>(n) / max_exact) /
                      std::log(static_cast<double>(max_distance) / max_exact) *
                      (num_buckets - max_exact);
  return ret + std::min(static_cast<std::uint32_t>(large), num_buckets - 1);
}

std::vector<std::uint32_t> BucketMatrix(std::size_t tq, std::size_t tk,
                                        bool bidirectional,
                                        const ModelConfig& cfg) {
  std::vector<std::uint32_t> b(tq * tk);
  for (std::size_t i = 0; i < tq; ++i) {
    for (std::size_t j = 0; j < tk; ++j) {
      b[i * tk + j] = RelativeBucket(static_cast<long>(j) - static_cast<long>(i),
                                     bidirectional, cfg.num_buckets,
                                     cfg.max_distance);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Stack-level forward with caches.

struct EncoderLayerCache {
  NormCache attn_norm;
  AttentionCache attn;
  NormCache ff_norm;
  FeedForwardCache ff;
};

struct DecoderLayerCache {
  NormCache self_norm;
  AttentionCache self;
  NormCache cross_norm;
  AttentionCache cross;
  NormCache ff_norm;
  FeedForwardCache ff;
};

struct EncoderRun {
  std::vector<bool> valid;
  std::vector<EncoderLayerCache> layers;
  NormCache final_norm;
  Matrix out;
  RelativeBias bias;
};

struct DecoderRun {
  std::vector<bool> valid;
  std::vector<DecoderLayerCache> layers;
  NormCache final_norm;
  Matrix out;
  RelativeBias bias;
};

void CheckIds(const ModelConfig& cfg, std::span<const TokenId> ids,
              const char* what) {
  if (ids.size() > cfg.max_len) {
    ThrowData(std::string(what) + " length " + std::to_string(ids.size()) +
              " exceeds max_len " + std::to_string(cfg.max_len));
  }
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::uint32_t>(id) >= cfg.vocab_size) {
      ThrowData(std::string(what) + " id out of range: " + std::to_string(id));
    }
  }
}

AttentionWeights AttnWeights(const ModelParams& p, const std::string& prefix) {
  return {&p.at(prefix + "/q"), &p.at(prefix + "/k"), &p.at(prefix + "/v"),
          &p.at(prefix + "/o")};
}

Matrix Embed(const ModelParams& p, std::span<const TokenId> ids,
             const char* stack) {
  const auto d = p.config.d_model;
  const Tensor& emb = p.at(kEmbeddingName);
  Matrix x(ids.size(), d);
  const Tensor* pos = nullptr;
  if (p.config.position_scheme == PositionScheme::kLearnedAbsolute) {
    pos = &p.at(std::string(stack) + "/position");
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const double* e = emb.row(ids[t]);
    double* xr = x.row(t);
    for (std::size_t c = 0; c < d; ++c) xr[c] = e[c] + (pos ? pos->row(t)[c] : 0.0);
  }
  return x;
}

void AddInPlace(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

EncoderRun RunEncoder(const ModelParams& p, std::span<const TokenId> ids) {
  const ModelConfig& cfg = p.config;
  CheckIds(cfg, ids, "encoder input");
  EncoderRun run;
  run.valid.resize(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) run.valid[t] = ids[t] != unigram::kPadId;
  const RelativeBias* bias = nullptr;
  if (cfg.position_scheme == PositionScheme::kRelativeBucket) {
    run.bias.table = &p.at("encoder/relative_bias");
    run.bias.buckets = BucketMatrix(ids.size(), ids.size(), true, cfg);
    bias = &run.bias;
  }
  Matrix x = Embed(p, ids, "encoder");
  run.layers.resize(cfg.n_enc_layers);
  for (std::uint32_t l = 0; l < cfg.n_enc_layers; ++l) {
    const std::string name = LayerName("encoder", l);
    auto& c = run.layers[l];
    Matrix h = RmsNormForward(x, p.at(name + "/attn_norm").data.data(), c.attn_norm);
    AddInPlace(x, AttentionForward(AttnWeights(p, name + "/attn"), h, h, run.valid,
                                   false, bias, cfg.n_heads, c.attn));
    h = RmsNormForward(x, p.at(name + "/ff_norm").data.data(), c.ff_norm);
    AddInPlace(x, FeedForwardForward(p.at(name + "/ff/wi"), p.at(name + "/ff/wo"),
                                     h, c.ff));
  }
  run.out = RmsNormForward(x, p.at("encoder/final_norm").data.data(), run.final_norm);
  return run;
}

DecoderRun RunDecoder(const ModelParams& p, const Matrix& enc_out,
                      const std::vector<bool>& enc_valid,
                      std::span<const TokenId> ids) {
  const ModelConfig& cfg = p.config;
  CheckIds(cfg, ids, "decoder input");
  DecoderRun run;
  run.valid.resize(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) run.valid[t] = ids[t] != unigram::kPadId;
  // The start token is never padding, so row 0 always has a visible key.
  if (!ids.empty()) run.valid[0] = true;
  const RelativeBias* bias = nullptr;
  if (cfg.position_scheme == PositionScheme::kRelativeBucket) {
    run.bias.table = &p.at("decoder/relative_bias");
    run.bias.buckets = BucketMatrix(ids.size(), ids.size(), false, cfg);
    bias = &run.bias;
  }
  Matrix y = Embed(p, ids, "decoder");
  run.layers.resize(cfg.n_dec_layers);
  for (std::uint32_t l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string name = LayerName("decoder", l);
    auto& c = run.layers[l];
    Matrix h = RmsNormForward(y, p.at(name + "/self_norm").data.data(), c.self_norm);
    AddInPlace(y, AttentionForward(AttnWeights(p, name + "/self"), h, h, run.valid,
                                   true, bias, cfg.n_heads, c.self));
    h = RmsNormForward(y, p.at(name + "/cross_norm").data.data(), c.cross_norm);
    AddInPlace(y, AttentionForward(AttnWeights(p, name + "/cross"), h, enc_out,
                                   enc_valid, false, nullptr, cfg.n_heads, c.cross));
    h = RmsNormForward(y, p.at(name + "/ff_norm").data.data(), c.ff_norm);
    AddInPlace(y, FeedForwardForward(p.at(name + "/ff/wi"), p.at(name + "/ff/wo"),
                                     h, c.ff));
  }
  run.out = RmsNormForward(y, p.at("decoder/final_norm").data.data(), run.final_norm);
  return run;
}

const Tensor& OutputProjection(const ModelParams& p) {
  return p.config.tie_embeddings ? p.at(kEmbeddingName) : p.at("lm_head");
}

Matrix Logits(const ModelParams& p, const Matrix& dec_out) {
  const Tensor& proj = OutputProjection(p);
  Matrix logits(dec_out.rows, proj.rows());
  kernels::GemmNT(dec_out.data.data(), proj.data.data(), logits.data.data(),
                  dec_out.rows, dec_out.cols, proj.rows());
  return logits;
}

// ---------------------------------------------------------------------------
// Backward through the stacks. Gradients land in grads for trainable names.

Tensor* GradFor(TensorMap& grads, const std::string& name) {
  auto it = grads.find(name);
  return it == grads.end() ? nullptr : &it->second;
}

AttentionGrads AttnGrads(TensorMap& grads, const std::string& prefix) {
  return {GradFor(grads, prefix + "/q"), GradFor(grads, prefix + "/k"),
          GradFor(grads, prefix + "/v"), GradFor(grads, prefix + "/o")};
}

void EmbedBackward(const ModelParams& p, std::span<const TokenId> ids,
                   const char* stack, const Matrix& dx, TensorMap& grads) {
  Tensor* demb = GradFor(grads, kEmbeddingName);
  Tensor* dpos = nullptr;
  if (p.config.position_scheme == PositionScheme::kLearnedAbsolute) {
    dpos = GradFor(grads, std::string(stack) + "/position");
  }
  const std::size_t d = dx.cols;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (demb) kernels::Axpy(1.0, dx.row(t), demb->row(ids[t]), d);
    if (dpos) kernels::Axpy(1.0, dx.row(t), dpos->row(t), d);
  }
}

void BackwardEncoder(const ModelParams& p, std::span<const TokenId> ids,
                     EncoderRun& run, const Matrix& d_out, TensorMap& grads) {
  const ModelConfig& cfg = p.config;
  Matrix dx(d_out.rows, d_out.cols);
  RmsNormBackward(run.final_norm, p.at("encoder/final_norm").data.data(), d_out,
                  dx, GradFor(grads, "encoder/final_norm") ? GradFor(grads, "encoder/final_norm")->data.data() : nullptr);
  if (cfg.position_scheme == PositionScheme::kRelativeBucket) {
    run.bias.grad = GradFor(grads, "encoder/relative_bias");
  }
  for (std::uint32_t l = cfg.n_enc_layers; l-- > 0;) {
    const std::string name = LayerName("encoder", l);
    auto& c = run.layers[l];
    Matrix dh(dx.rows, dx.cols);
    FeedForwardBackward(p.at(name + "/ff/wi"), p.at(name + "/ff/wo"), c.ff, dx, dh,
                        GradFor(grads, name + "/ff/wi"), GradFor(grads, name + "/ff/wo"));
    Tensor* dg = GradFor(grads, name + "/ff_norm");
    RmsNormBackward(c.ff_norm, p.at(name + "/ff_norm").data.data(), dh, dx,
                    dg ? dg->data.data() : nullptr);
    Matrix dh2(dx.rows, dx.cols);
    AttentionBackward(AttnWeights(p, name + "/attn"), c.attn, dx, cfg.n_heads,
                      cfg.position_scheme == PositionScheme::kRelativeBucket ? &run.bias : nullptr,
                      dh2, dh2, AttnGrads(grads, name + "/attn"));
    dg = GradFor(grads, name + "/attn_norm");
    RmsNormBackward(c.attn_norm, p.at(name + "/attn_norm").data.data(), dh2, dx,
                    dg ? dg->data.data() : nullptr);
  }
  EmbedBackward(p, ids, "encoder", dx, grads);
}

// Returns the gradient with respect to the encoder output.
Matrix BackwardDecoder(const ModelParams& p, std::span<const TokenId> ids,
                       DecoderRun& run, const EncoderRun& enc,
                       const Matrix& d_out, TensorMap& grads) {
  const ModelConfig& cfg = p.config;
  Matrix d_enc(enc.out.rows, enc.out.cols);
  Matrix dy(d_out.rows, d_out.cols);
  Tensor* dg = GradFor(grads, "decoder/final_norm");
  RmsNormBackward(run.final_norm, p.at("decoder/final_norm").data.data(), d_out,
                  dy, dg ? dg->data.data() : nullptr);
  if (cfg.position_scheme == PositionScheme::kRelativeBucket) {
    run.bias.grad = GradFor(grads, "decoder/relative_bias");
  }
  for (std::uint32_t l = cfg.n_dec_layers; l-- > 0;) {
    const std::string name = LayerName("decoder", l);
    auto& c = run.layers[l];
    Matrix dh(dy.rows, dy.cols);
    FeedForwardBackward(p.at(name + "/ff/wi"), p.at(name + "/ff/wo"), c.ff, dy, dh,
                        GradFor(grads, name + "/ff/wi"), GradFor(grads, name + "/ff/wo"));
    dg = GradFor(grads, name + "/ff_norm");
    RmsNormBackward(c.ff_norm, p.at(name + "/ff_norm").data.data(), dh, dy,
                    dg ? dg->data.data() : nullptr);

    Matrix dhc(dy.rows, dy.cols);
    AttentionBackward(AttnWeights(p, name + "/cross"), c.cross, dy, cfg.n_heads,
                      nullptr, dhc, d_enc, AttnGrads(grads, name + "/cross"));
    dg = GradFor(grads, name + "/cross_norm");
    RmsNormBackward(c.cross_norm, p.at(name + "/cross_norm").data.data(), dhc, dy,
                    dg ? dg->data.data() : nullptr);

    Matrix dhs(dy.rows, dy.cols);
    AttentionBackward(AttnWeights(p, name + "/self"), c.self, dy, cfg.n_heads,
                      cfg.position_scheme == PositionScheme::kRelativeBucket ? &run.bias : nullptr,
                      dhs, dhs, AttnGrads(grads, name + "/self"));
    dg = GradFor(grads, name + "/self_norm");
    RmsNormBackward(c.self_norm, p.at(name + "/self_norm").data.data(), dhs, dy,
                    dg ? dg->data.data() : nullptr);
  }
  EmbedBackward(p, ids, "decoder", dy, grads);
  return d_enc;
}

std::vector<double> MeanPoolOf(const Matrix& states, const std::vector<bool>& valid) {
  std::vector<double> pool(states.cols, 0.0);
  std::size_t n = 0;
  for (std::size_t t = 0; t < states.rows; ++t) {
    if (!valid[t]) continue;
    kernels::Axpy(1.0, states.row(t), pool.data(), states.cols);
    ++n;
  }
  if (n == 0) ThrowData("mean pooling over an all-padding input");
  for (double& v : pool) v /= static_cast<double>(n);
  return pool;
}

// Per-example loss and gradient into grads (zeroed by the caller).
double ExampleGradients(const ModelParams& p, const Example& ex,
                        Objective objective, TensorMap& grads, double& weight) {
  EncoderRun enc = RunEncoder(p, ex.enc_ids);
  const std::size_t d = p.config.d_model;
  if (objective == Objective::kSeq2Seq) {
    const TokenIds dec_in = DecoderInput(ex.target_ids, p.config.decoder_start_id);
    DecoderRun dec = RunDecoder(p, enc.out, enc.valid, dec_in);
    const Matrix logits = Logits(p, dec.out);
    const std::size_t vocab = logits.cols;
    Matrix dlogits(logits.rows, vocab);
    double loss = 0.0;
    double count = 0.0;
    for (std::size_t t = 0; t < logits.rows; ++t) {
      const TokenId target = ex.target_ids[t];
      if (target == unigram::kPadId) continue;
      const double* lr = logits.row(t);
      const double mx = *std::max_element(lr, lr + vocab);
      double sum = 0.0;
      for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(lr[v] - mx);
      const double log_z = mx + std::log(sum);
      loss += log_z - lr[target];
      count += 1.0;
      double* dr = dlogits.row(t);
      for (std::size_t v = 0; v < vocab; ++v) dr[v] = std::exp(lr[v] - log_z);
      dr[target] -= 1.0;
    }
    weight = count;
    if (count == 0.0) return 0.0;
    const Tensor& proj = OutputProjection(p);
    Matrix d_dec(dec.out.rows, d);
    kernels::GemmNN(dlogits.data.data(), proj.data.data(), d_dec.data.data(),
                    dlogits.rows, vocab, d);
    Tensor* dproj = GradFor(grads, p.config.tie_embeddings ? kEmbeddingName : "lm_head");
    if (dproj) {
      kernels::GemmTN(dlogits.data.data(), dec.out.data.data(), dproj->data.data(),
                      vocab, dlogits.rows, d);
    }
    const Matrix d_enc = BackwardDecoder(p, dec_in, dec, enc, d_dec, grads);
    BackwardEncoder(p, ex.enc_ids, enc, d_enc, grads);
    return loss;
  }

  const std::vector<double> pool = MeanPoolOf(enc.out, enc.valid);
  std::vector<double> dpool(d, 0.0);
  double loss = 0.0;
  if (objective == Objective::kRegression) {
    const Tensor& w = p.at("head/regression/w");
    const double b = p.at("head/regression/b").data[0];
    const double z = kernels::Dot(pool.data(), w.data.data(), d) + b;
    const double y = Sigmoid(z);
    const double score = 4.0 * y + 1.0;
    const double err = score - ex.score;
    loss = err * err;
    const double dz = 2.0 * err * 4.0 * y * (1.0 - y);
    if (Tensor* dw = GradFor(grads, "head/regression/w")) {
      kernels::Axpy(dz, pool.data(), dw->data.data(), d);
    }
    if (Tensor* db = GradFor(grads, "head/regression/b")) db->data[0] += dz;
    kernels::Axpy(dz, w.data.data(), dpool.data(), d);
  } else {
    if (ex.label != 0 && ex.label != 1) ThrowData("classification label must be 0 or 1");
    const Tensor& w = p.at("head/classification/w");
    const Tensor& b = p.at("head/classification/b");
    double z[2] = {b.data[0], b.data[1]};
    for (std::size_t i = 0; i < d; ++i) {
      z[0] += pool[i] * w.data[i * 2];
      z[1] += pool[i] * w.data[i * 2 + 1];
    }
    const double mx = std::max(z[0], z[1]);
    const double log_z = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
    loss = log_z - z[ex.label];
    double dz[2] = {std::exp(z[0] - log_z), std::exp(z[1] - log_z)};
    dz[ex.label] -= 1.0;
    if (Tensor* dw = GradFor(grads, "head/classification/w")) {
      for (std::size_t i = 0; i < d; ++i) {
        dw->data[i * 2] += dz[0] * pool[i];
        dw->data[i * 2 + 1] += dz[1] * pool[i];
      }
    }
    if (Tensor* db = GradFor(grads, "head/classification/b")) {
      db->data[0] += dz[0];
      db->data[1] += dz[1];
    }
    for (std::size_t i = 0; i < d; ++i) {
      dpool[i] += w.data[i * 2] * dz[0] + w.data[i * 2 + 1] * dz[1];
    }
  }
  weight = 1.0;
  Matrix d_enc(enc.out.rows, d);
  std::size_t n_valid = 0;
  for (bool v : enc.valid) n_valid += v ? 1 : 0;
  const double inv = 1.0 / static_cast<double>(n_valid);
  for (std::size_t t = 0; t < enc.out.rows; ++t) {
    if (enc.valid[t]) kernels::Axpy(inv, dpool.data(), d_enc.row(t), d);
  }
  BackwardEncoder(p, ex.enc_ids, enc, d_enc, grads);
  return loss;
}

}  // namespace

// ---------------------------------------------------------------------------

void ModelConfig::Validate() const {
  if (vocab_size < unigram::kNumReserved) ThrowUsage("vocab_size must cover the reserved ids");
  if (d_model == 0 || n_heads == 0) ThrowUsage("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) ThrowUsage("d_model must be divisible by n_heads");
  if (d_ff == 0) ThrowUsage("d_ff must be positive");
  if (max_len < 1) ThrowUsage("max_len must be at least 1");
  if (position_scheme == PositionScheme::kRelativeBucket &&
      (num_buckets < 4 || max_distance < num_buckets / 2)) {
    ThrowUsage("relative position buckets misconfigured");
  }
  if (decoder_start_id < 0 || static_cast<std::uint32_t>(decoder_start_id) >= vocab_size) {
    ThrowUsage("decoder_start_id out of range");
  }
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) ThrowData("missing tensor " + name);
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) ThrowData("missing tensor " + name);
  return it->second;
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

TrainableMask TrainableMask::All(const ModelParams& params) {
  TrainableMask m;
  for (const auto& [name, t] : params.tensors) m.names_.insert(name);
  return m;
}

TrainableMask TrainableMask::EmbeddingsOnly(const ModelParams&) {
  TrainableMask m;
  m.names_.insert(kEmbeddingName);
  return m;
}

TrainableMask TrainableMask::Of(std::set<std::string> names) {
  TrainableMask m;
  m.names_ = std::move(names);
  return m;
}

ModelParams InitModel(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  ModelParams p;
  p.config = config;
  const std::size_t d = config.d_model;
  Xoshiro256 rng(seed);
  auto normal = [&](const std::string& name, std::vector<std::size_t> shape,
                    double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.Normal() * stddev;
    p.tensors[name] = std::move(t);
  };
  auto uniform = [&](const std::string& name, std::size_t fan_in,
                     std::size_t fan_out) {
    Tensor t({fan_in, fan_out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data) v = (2.0 * rng.Uniform() - 1.0) * bound;
    p.tensors[name] = std::move(t);
  };
  auto ones = [&](const std::string& name) {
    Tensor t({d});
    std::fill(t.data.begin(), t.data.end(), 1.0);
    p.tensors[name] = std::move(t);
  };
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  normal(kEmbeddingName, {config.vocab_size, d}, emb_std);
  for (const char* stack : {"encoder", "decoder"}) {
    if (config.position_scheme == PositionScheme::kLearnedAbsolute) {
      normal(std::string(stack) + "/position", {config.max_len, d}, emb_std);
    } else {
      p.tensors[std::string(stack) + "/relative_bias"] =
          Tensor({config.num_buckets, config.n_heads});
    }
  }
  for (std::uint32_t l = 0; l < config.n_enc_layers; ++l) {
    const std::string name = LayerName("encoder", l);
    ones(name + "/attn_norm");
    for (const char* w : {"q", "k", "v", "o"}) uniform(name + "/attn/" + w, d, d);
    ones(name + "/ff_norm");
    uniform(name + "/ff/wi", d, config.d_ff);
    uniform(name + "/ff/wo", config.d_ff, d);
  }
  ones("encoder/final_norm");
  for (std::uint32_t l = 0; l < config.n_dec_layers; ++l) {
    const std::string name = LayerName("decoder", l);
    ones(name + "/self_norm");
    for (const char* w : {"q", "k", "v", "o"}) uniform(name + "/self/" + w, d, d);
    ones(name + "/cross_norm");
    for (const char* w : {"q", "k", "v", "o"}) uniform(name + "/cross/" + w, d, d);
    ones(name + "/ff_norm");
    uniform(name + "/ff/wi", d, config.d_ff);
    uniform(name + "/ff/wo", config.d_ff, d);
  }
  ones("decoder/final_norm");
  if (!config.tie_embeddings) normal("lm_head", {config.vocab_size, d}, emb_std);
  uniform("head/regression/w", d, 1);
  p.tensors["head/regression/b"] = Tensor({1});
  uniform("head/classification/w", d, 2);
  p.tensors["head/classification/b"] = Tensor({2});
  return p;
}

Matrix Forward(const ModelParams& params, std::span<const TokenId> enc_ids,
               std::span<const TokenId> dec_ids) {
  const EncoderRun enc = RunEncoder(params, enc_ids);
  const DecoderRun dec = RunDecoder(params, enc.out, enc.valid, dec_ids);
  return Logits(params, dec.out);
}

EncoderOutput Encode(const ModelParams& params, std::span<const TokenId> enc_ids) {
  EncoderRun run = RunEncoder(params, enc_ids);
  return {std::move(run.out), std::move(run.valid)};
}

Matrix DecoderLogits(const ModelParams& params, const EncoderOutput& enc,
                     std::span<const TokenId> dec_ids) {
  const DecoderRun dec = RunDecoder(params, enc.states, enc.valid, dec_ids);
  return Logits(params, dec.out);
}

Matrix EncoderStates(const ModelParams& params, std::span<const TokenId> enc_ids) {
  return RunEncoder(params, enc_ids).out;
}

std::vector<double> EncoderMeanPool(const ModelParams& params,
                                    std::span<const TokenId> enc_ids) {
  const EncoderRun enc = RunEncoder(params, enc_ids);
  return MeanPoolOf(enc.out, enc.valid);
}

double CrossEntropy(const Matrix& logits, std::span<const TokenId> targets) {
  if (targets.size() != logits.rows) ThrowUsage("targets do not match logits rows");
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < logits.rows; ++t) {
    if (targets[t] == unigram::kPadId) continue;
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= logits.cols) {
      ThrowData("target id out of range");
    }
    const double* lr = logits.row(t);
    const double mx = *std::max_element(lr, lr + logits.cols);
    double sum = 0.0;
    for (std::size_t v = 0; v < logits.cols; ++v) sum += std::exp(lr[v] - mx);
    loss += mx + std::log(sum) - lr[targets[t]];
    ++n;
  }
  if (n == 0) ThrowData("cross-entropy over an all-padding target");
  return loss / static_cast<double>(n);
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double RegressionHead(std::span<const double> pool, std::span<const double> w,
                      double b) {
  double z = b;
  for (std::size_t i = 0; i < pool.size(); ++i) z += pool[i] * w[i];
  return 4.0 * Sigmoid(z) + 1.0;
}

double RegressionHead(const ModelParams& params, std::span<const double> pool) {
  return RegressionHead(pool, params.at("head/regression/w").data,
                        params.at("head/regression/b").data[0]);
}

std::array<double, 2> ClassificationHead(std::span<const double> pool,
                                         std::span<const double> w,
                                         std::span<const double, 2> b) {
  double z[2] = {b[0], b[1]};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    z[0] += pool[i] * w[i * 2];
    z[1] += pool[i] * w[i * 2 + 1];
  }
  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx);
  const double e1 = std::exp(z[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::array<double, 2> ClassificationHead(const ModelParams& params,
                                         std::span<const double> pool) {
  const auto& b = params.at("head/classification/b").data;
  return ClassificationHead(pool, params.at("head/classification/w").data,
                            std::span<const double, 2>(b.data(), 2));
}

TokenIds DecoderInput(std::span<const TokenId> target, TokenId start_id) {
  TokenIds in;
  in.reserve(target.size());
  if (target.empty()) return in;
  in.push_back(start_id);
  in.insert(in.end(), target.begin(), target.end() - 1);
  return in;
}

void GradAccumulator::Reset() {
  loss_sum = 0.0;
  weight = 0.0;
  for (auto& [name, g] : grads) g.Zero();
}

GradAccumulator MakeAccumulator(const ModelParams& params,
                                const TrainableMask& mask) {
  GradAccumulator acc;
  for (const auto& [name, t] : params.tensors) {
    if (mask.Contains(name)) acc.grads[name] = Tensor(t.shape);
  }
  return acc;
}

void AccumulateGradients(const ModelParams& params,
                         std::span<const Example> examples, Objective objective,
                         const TrainableMask& mask, GradAccumulator& acc) {
  GradAccumulator scratch = MakeAccumulator(params, mask);
  for (const Example& ex : examples) {
    scratch.Reset();
    double weight = 0.0;
    const double loss = ExampleGradients(params, ex, objective, scratch.grads, weight);
    acc.loss_sum += loss;
    acc.weight += weight;
    for (auto& [name, g] : acc.grads) {
      const Tensor& s = scratch.grads.at(name);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += s.data[i];
    }
  }
}

std::pair<double, double> LossSum(const ModelParams& params,
                                  std::span<const Example> examples,
                                  Objective objective) {
  double loss = 0.0;
  double weight = 0.0;
  for (const Example& ex : examples) {
    const EncoderRun enc = RunEncoder(params, ex.enc_ids);
    if (objective == Objective::kSeq2Seq) {
      const TokenIds dec_in = DecoderInput(ex.target_ids, params.config.decoder_start_id);
      const DecoderRun dec = RunDecoder(params, enc.out, enc.valid, dec_in);
      const Matrix logits = Logits(params, dec.out);
      std::size_t n = 0;
      for (TokenId t : ex.target_ids) n += t != unigram::kPadId ? 1 : 0;
      if (n == 0) continue;
      loss += CrossEntropy(logits, ex.target_ids) * static_cast<double>(n);
      weight += static_cast<double>(n);
    } else if (objective == Objective::kRegression) {
      const double s = RegressionHead(params, MeanPoolOf(enc.out, enc.valid));
      loss += (s - ex.score) * (s - ex.score);
      weight += 1.0;
    } else {
      const auto probs = ClassificationHead(params, MeanPoolOf(enc.out, enc.valid));
      if (ex.label != 0 && ex.label != 1) ThrowData("classification label must be 0 or 1");
      loss += -std::log(probs[ex.label]);
      weight += 1.0;
    }
  }
  return {loss, weight};
}

TensorMap MeanGradients(const GradAccumulator& acc) {
  TensorMap out = acc.grads;
  if (acc.weight > 0.0) {
    const double inv = 1.0 / acc.weight;
    for (auto& [name, g] : out) {
      for (double& v : g.data) v *= inv;
    }
  }
  return out;
}

}  // namespace dt5::model
