// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/nn.hpp"

#include <cmath>
#include <cstring>

namespace melstream::nn {

namespace {

void count_lstm_step_aux(int rows, int hid, OpCounter* c) {
  if (!c) return;
  c->nonlins += static_cast<uint64_t>(rows) * 5 * hid;  // 3 sigmoid + 2 tanh gates worth
  c->adds += static_cast<uint64_t>(rows) * 4 * hid;     // cell and output elementwise
}

void activate_gate_row(float* g, int hid) {
  const auto& k = simd::ops();
  k.sigmoid_ip(g, hid);              // i
  k.sigmoid_ip(g + hid, hid);        // f
  k.tanh_ip(g + 2 * hid, hid);       // g
  k.sigmoid_ip(g + 3 * hid, hid);    // o
}

}  // namespace

// ---- packing ----

LnParams LnParams::pack(const Tensor& gamma, const Tensor& beta) {
  if (gamma.rank() != 1 || !gamma.same_shape(beta))
    throw ShapeError("layer norm params must be matching vectors");
  LnParams p;
  p.d = static_cast<int>(gamma.dim(0));
  p.gamma.resize(round_up16(p.d));
  p.beta.resize(round_up16(p.d));
  std::memcpy(p.gamma.data(), gamma.data(), p.d * sizeof(float));
  std::memcpy(p.beta.data(), beta.data(), p.d * sizeof(float));
  return p;
}

PackedLinear PackedLinear::pack(const Tensor& W, const Tensor* b) {
  if (W.rank() != 2) throw ShapeError("linear weight must be 2-D, got " + W.shape_str());
  PackedLinear p;
  p.out = static_cast<int>(W.dim(0));
  p.in = static_cast<int>(W.dim(1));
  p.w.resize(p.out, p.in);
  for (int o = 0; o < p.out; o++)
    std::memcpy(p.w.row(o), W.data() + static_cast<size_t>(o) * p.in, p.in * sizeof(float));
  if (b) {
    if (b->rank() != 1 || b->dim(0) != p.out)
      throw ShapeError("linear bias shape mismatch: " + b->shape_str());
    p.bias.resize(round_up16(p.out));
    std::memcpy(p.bias.data(), b->data(), p.out * sizeof(float));
  }
  return p;
}

void PackedLinear::gemm(const float* X, int ldx, int rows, float* Y, int ldy,
                        bool acc, bool with_bias, OpCounter* c) const {
  simd::ops().gemm_bt(X, ldx, w.row(0), w.stride,
                      with_bias && has_bias() ? bias.data() : nullptr, Y, ldy,
                      rows, out, in, acc);
  if (c) {
    c->macs += static_cast<uint64_t>(rows) * out * in;
    if (with_bias && has_bias()) c->adds += static_cast<uint64_t>(rows) * out;
  }
}

PackedLstm PackedLstm::pack(const Tensor& wx, const Tensor& wh, const Tensor& b) {
  if (wx.rank() != 2 || wh.rank() != 2 || b.rank() != 1)
    throw ShapeError("lstm params must be [4h,in], [4h,h], [4h]");
  PackedLstm p;
  p.hid = static_cast<int>(wh.dim(1));
  p.in = static_cast<int>(wx.dim(1));
  const int gates = 4 * p.hid;
  if (wx.dim(0) != gates || wh.dim(0) != gates || b.dim(0) != gates)
    throw ShapeError("lstm gate dimension mismatch");
  p.wx.resize(gates, p.in);
  p.wh.resize(gates, p.hid);
  p.wht.resize(p.hid, gates);
  for (int g = 0; g < gates; g++) {
    std::memcpy(p.wx.row(g), wx.data() + static_cast<size_t>(g) * p.in, p.in * sizeof(float));
    std::memcpy(p.wh.row(g), wh.data() + static_cast<size_t>(g) * p.hid, p.hid * sizeof(float));
    for (int k = 0; k < p.hid; k++) p.wht.row(k)[g] = wh.data()[static_cast<size_t>(g) * p.hid + k];
  }
  p.bias.resize(round_up16(gates));
  std::memcpy(p.bias.data(), b.data(), gates * sizeof(float));
  return p;
}

// ---- packed forward ----

void layer_norm_rows(float* x, int ldx, int rows, int d, const float* gamma,
                     const float* beta, float eps, OpCounter* c) {
  if (d < 1) throw ShapeError("layer norm over empty axis");
  for (int r = 0; r < rows; r++) {
    float* row = x + static_cast<size_t>(r) * ldx;
    float mean = 0.f;
    for (int i = 0; i < d; i++) mean += row[i];
    mean /= static_cast<float>(d);
    float var = 0.f;
    for (int i = 0; i < d; i++) {
      const float t = row[i] - mean;
      var += t * t;
    }
    var /= static_cast<float>(d);
    const float rstd = 1.f / std::sqrt(var + eps);
    for (int i = 0; i < d; i++) row[i] = (row[i] - mean) * rstd * gamma[i] + beta[i];
  }
  if (c) {
    c->adds += static_cast<uint64_t>(rows) * 5 * d;
    c->nonlins += static_cast<uint64_t>(rows);
  }
}

void lstm_xgates(const PackedLstm& w, const float* X, int ldx, int rows,
                 float* G, int ldg, OpCounter* c) {
  simd::ops().gemm_bt(X, ldx, w.wx.row(0), w.wx.stride, w.bias.data(), G, ldg,
                      rows, 4 * w.hid, w.in, false);
  if (c) {
    c->macs += static_cast<uint64_t>(rows) * 4 * w.hid * w.in;
    c->adds += static_cast<uint64_t>(rows) * 4 * w.hid;
  }
}

void lstm_step_batch(const PackedLstm& w, float* G, int ldg, float* h, int ldh,
                     float* c, int ldc, int rows, OpCounter* ctr) {
  const int hid = w.hid;
  simd::ops().gemm_bt(h, ldh, w.wh.row(0), w.wh.stride, nullptr, G, ldg, rows,
                      4 * hid, hid, true);
  if (ctr) ctr->macs += static_cast<uint64_t>(rows) * 4 * hid * hid;
  for (int r = 0; r < rows; r++) {
    float* g = G + static_cast<size_t>(r) * ldg;
    activate_gate_row(g, hid);
    simd::ops().lstm_update(c + static_cast<size_t>(r) * ldc,
                            h + static_cast<size_t>(r) * ldh, g, g + hid,
                            g + 2 * hid, g + 3 * hid, hid);
  }
  count_lstm_step_aux(rows, hid, ctr);
}

void lstm_step_single(const PackedLstm& w, float* g, float* h, float* c,
                      OpCounter* ctr) {
  const int hid = w.hid;
  simd::ops().axpy_rows(g, w.wht.row(0), w.wht.stride, h, hid, 4 * hid,
                        nullptr, true);
  if (ctr) ctr->macs += static_cast<uint64_t>(4) * hid * hid;
  activate_gate_row(g, hid);
  simd::ops().lstm_update(c, h, g, g + hid, g + 2 * hid, g + 3 * hid, hid);
  count_lstm_step_aux(1, hid, ctr);
}

// ---- Tensor-level reference ops ----

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b, OpCounter* c) {
  if (W.rank() != 2) throw ShapeError("linear weight must be 2-D");
  const int out = static_cast<int>(W.dim(0));
  const int in = static_cast<int>(W.dim(1));
  if (x.rank() < 1 || x.dims().back() != in)
    throw ShapeError("linear input last dim " + x.shape_str() + " != " + std::to_string(in));
  if (b.rank() != 1 || b.dim(0) != out) throw ShapeError("linear bias shape mismatch");
  std::vector<int64_t> od = x.dims();
  od.back() = out;
  Tensor y(od);
  const int64_t rows = x.numel() / in;
  const auto& k = simd::ops();
  for (int64_t r = 0; r < rows; r++) {
    const float* xr = x.data() + r * in;
    float* yr = y.data() + r * out;
    for (int o = 0; o < out; o++)
      yr[o] = k.dot(xr, W.data() + static_cast<size_t>(o) * in, in) + b[o];
  }
  if (c) {
    c->macs += static_cast<uint64_t>(rows) * out * in;
    c->adds += static_cast<uint64_t>(rows) * out;
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps, OpCounter* c) {
  if (x.rank() < 1) throw ShapeError("layer norm needs at least rank 1");
  const int d = static_cast<int>(x.dims().back());
  if (gamma.rank() != 1 || gamma.dim(0) != d || !gamma.same_shape(beta))
    throw ShapeError("layer norm param shape mismatch");
  Tensor y = x;
  layer_norm_rows(y.data(), d, static_cast<int>(y.numel() / d), d, gamma.data(),
                  beta.data(), eps, c);
  return y;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, ConvMode mode, OpCounter* c) {
  if (x.rank() != 2 || kernel.rank() != 3)
    throw ShapeError("conv1d expects x [L,in], kernel [out,in,k]");
  const int64_t L = x.dim(0);
  const int in = static_cast<int>(x.dim(1));
  const int out = static_cast<int>(kernel.dim(0));
  const int k = static_cast<int>(kernel.dim(2));
  if (kernel.dim(1) != in) throw ShapeError("conv1d channel mismatch");
  if (mode == ConvMode::same_centered && k % 2 == 0)
    throw ConfigError("same_centered conv1d requires odd kernel size");
  const int64_t off = mode == ConvMode::causal_past ? k - 1 : k / 2;
  Tensor y({L, out});
  for (int64_t t = 0; t < L; t++) {
    for (int o = 0; o < out; o++) {
      float s = 0.f;
      for (int j = 0; j < k; j++) {
        const int64_t src = t - off + j;
        if (src < 0 || src >= L) continue;  // zero padding
        const float* xr = x.data() + src * in;
        const float* kr = kernel.data() + (static_cast<size_t>(o) * in) * k + j;
        for (int i = 0; i < in; i++) s += xr[i] * kr[static_cast<size_t>(i) * k];
      }
      y.at2(t, o) = s;
    }
  }
  if (c) c->macs += static_cast<uint64_t>(L) * out * in * k;
  return y;
}

LstmParams LstmParams::make(Tensor wx, Tensor wh, Tensor b) {
  LstmParams p;
  p.hid = static_cast<int>(wh.dim(1));
  p.in = static_cast<int>(wx.dim(1));
  if (wx.dim(0) != 4 * p.hid || wh.dim(0) != 4 * p.hid || b.dim(0) != 4 * p.hid)
    throw ShapeError("lstm gate dimension mismatch");
  p.wx = std::move(wx);
  p.wh = std::move(wh);
  p.b = std::move(b);
  return p;
}

void lstm_step(const LstmParams& p, const float* x, LstmState& s, OpCounter* c) {
  const int hid = p.hid;
  if (static_cast<int>(s.h.size()) != hid || static_cast<int>(s.c.size()) != hid)
    throw ShapeError("lstm state size mismatch");
  std::vector<float> g(4 * hid);
  const auto& k = simd::ops();
  for (int i = 0; i < 4 * hid; i++)
    g[i] = k.dot(p.wx.data() + static_cast<size_t>(i) * p.in, x, p.in) +
           k.dot(p.wh.data() + static_cast<size_t>(i) * hid, s.h.data(), hid) + p.b[i];
  activate_gate_row(g.data(), hid);
  k.lstm_update(s.c.data(), s.h.data(), g.data(), g.data() + hid,
                g.data() + 2 * hid, g.data() + 3 * hid, hid);
  if (c) {
    c->macs += static_cast<uint64_t>(4) * hid * (p.in + hid);
    c->adds += static_cast<uint64_t>(4) * hid;
  }
  count_lstm_step_aux(1, hid, c);
}

Tensor lstm_seq(const Tensor& x, const LstmParams& fwd, const LstmParams* bwd,
                OpCounter* c) {
  if (x.rank() != 2) throw ShapeError("lstm_seq expects [L,in]");
  const int64_t L = x.dim(0);
  const int hid = fwd.hid;
  const int width = bwd ? 2 * hid : hid;
  Tensor y({L, width});
  LstmState s(hid);
  for (int64_t t = 0; t < L; t++) {
    lstm_step(fwd, x.data() + t * x.dim(1), s, c);
    std::memcpy(y.data() + t * width, s.h.data(), hid * sizeof(float));
  }
  if (bwd) {
    if (bwd->hid != hid || bwd->in != fwd.in)
      throw ShapeError("bidirectional lstm param mismatch");
    LstmState sb(hid);
    for (int64_t t = L - 1; t >= 0; t--) {
      lstm_step(*bwd, x.data() + t * x.dim(1), sb, c);
      std::memcpy(y.data() + t * width + hid, sb.h.data(), hid * sizeof(float));
    }
  }
  return y;
}

void relu_ip(Tensor& x, OpCounter* c) {
  simd::ops().relu_ip(x.data(), static_cast<int>(x.numel()));
  if (c) c->nonlins += static_cast<uint64_t>(x.numel());
}
void tanh_ip(Tensor& x, OpCounter* c) {
  simd::ops().tanh_ip(x.data(), static_cast<int>(x.numel()));
  if (c) c->nonlins += static_cast<uint64_t>(x.numel());
}
void sigmoid_ip(Tensor& x, OpCounter* c) {
  simd::ops().sigmoid_ip(x.data(), static_cast<int>(x.numel()));
  if (c) c->nonlins += static_cast<uint64_t>(x.numel());
}

}  // namespace melstream::nn
