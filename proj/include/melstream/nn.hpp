// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dense NN primitives: linear, layer norm, 1-D convolution, LSTM and
// activations, all float32 with float32 accumulation. Two surfaces:
//
//  - Tensor-level reference ops defining the semantics (and the operation
//    counting convention) that the test suite checks against naive oracles.
//  - Packed row-major fast paths (PackedLinear / PackedLstm) running on the
//    dispatched SIMD kernels; the pipeline modules use these.
//
// Counting convention: macs counts matrix/conv/recurrent multiply-adds
// (padding positions included, so counts are shape-only); adds counts bias
// and elementwise arithmetic; nonlins counts activations. One LSTM step
// adds 4*hid*(in+hid) macs.

#pragma once

#include "melstream/common.hpp"
#include "melstream/simd.hpp"
#include "melstream/tensor.hpp"

namespace melstream::nn {

inline constexpr float kLayerNormEps = 1e-5f;

// ---- packed fast paths ----

struct LnParams {
  AlignedBuf gamma, beta;
  int d = 0;
  static LnParams pack(const Tensor& gamma, const Tensor& beta);
};

struct PackedLinear {
  PackedMat w;      // [out][pad16(in)], rows zero-padded
  AlignedBuf bias;  // pad16(out) or empty
  int in = 0, out = 0;

  bool has_bias() const { return bias.size() > 0; }
  static PackedLinear pack(const Tensor& W, const Tensor* b);

  // Y[rows,out] (+)= X[rows,in] * W^T (+ bias). X rows padded through
  // pad16(in); Y rows writable through out.
  void gemm(const float* X, int ldx, int rows, float* Y, int ldy, bool acc,
            bool with_bias, OpCounter* c) const;
};

struct PackedLstm {
  PackedMat wx;     // [4h][pad16(in)]
  PackedMat wh;     // [4h][pad16(h)]
  PackedMat wht;    // [h][pad16(4h)] transposed copy for single-row steps
  AlignedBuf bias;  // pad16(4h)
  int in = 0, hid = 0;

  static PackedLstm pack(const Tensor& wx, const Tensor& wh, const Tensor& b);
};

// Per-row layer norm over the last d values followed by affine.
void layer_norm_rows(float* x, int ldx, int rows, int d, const float* gamma,
                     const float* beta, float eps, OpCounter* c);

// G[rows,4h] = X[rows,in] * Wx^T + bias. Entry point of every LSTM step.
void lstm_xgates(const PackedLstm& w, const float* X, int ldx, int rows,
                 float* G, int ldg, OpCounter* c);

// One time step for `rows` independent sequences sharing weights.
// G must hold xgates(+bias); h/c are [rows][pad16(h)] state matrices.
void lstm_step_batch(const PackedLstm& w, float* G, int ldg, float* h, int ldh,
                     float* c, int ldc, int rows, OpCounter* ctr);

// One step of a single sequence. g is one padded gate row holding
// xgates(+bias); h and c are pad16(h) state rows.
void lstm_step_single(const PackedLstm& w, float* g, float* h, float* c,
                      OpCounter* ctr);

// ---- Tensor-level reference ops ----

enum class ConvMode { same_centered, causal_past };

// y = x W^T + b over the last axis: x [..., in] -> [..., out].
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b, OpCounter* c = nullptr);

// Normalizes each row of the last axis to zero mean / unit variance
// (eps inside the square root), then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = kLayerNormEps, OpCounter* c = nullptr);

// x [L,in], kernel [out,in,k]. causal_past pads exactly k-1 zeros before
// position 0 and none after, so y[t] depends only on x[max(0,t-k+1)..t].
Tensor conv1d(const Tensor& x, const Tensor& kernel, ConvMode mode,
              OpCounter* c = nullptr);

struct LstmParams {
  Tensor wx;  // [4h, in], gate order i|f|g|o
  Tensor wh;  // [4h, h]
  Tensor b;   // [4h]
  int in = 0, hid = 0;
  static LstmParams make(Tensor wx, Tensor wh, Tensor b);
};

struct LstmState {
  std::vector<float> h, c;
  explicit LstmState(int hid = 0) : h(hid, 0.f), c(hid, 0.f) {}
};

// Standard cell: sigmoid gates, tanh candidate/output, no peepholes.
void lstm_step(const LstmParams& p, const float* x, LstmState& s, OpCounter* c = nullptr);

// x [L,in] -> [L,hid] (forward) or [L,2*hid] (with bwd params, fwd|bwd
// concatenated per position). Zero initial state.
Tensor lstm_seq(const Tensor& x, const LstmParams& fwd, const LstmParams* bwd,
                OpCounter* c = nullptr);

void relu_ip(Tensor& x, OpCounter* c = nullptr);
void tanh_ip(Tensor& x, OpCounter* c = nullptr);
void sigmoid_ip(Tensor& x, OpCounter* c = nullptr);

}  // namespace melstream::nn
