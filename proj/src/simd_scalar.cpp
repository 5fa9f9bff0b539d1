// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Scalar reference kernels. These define the semantics the vector lanes are
// tested against; keep them as plain loops.

#include <cmath>

#include "melstream/simd.hpp"

namespace melstream::simd {
namespace {

float dot_scalar(const float* a, const float* b, int n) {
  float s = 0.f;
  for (int i = 0; i < n; i++) s += a[i] * b[i];
  return s;
}

void gemm_bt_scalar(const float* A, int lda, const float* B, int ldb,
                    const float* bias, float* C, int ldc, int M, int N, int K,
                    bool acc) {
  for (int m = 0; m < M; m++) {
    const float* a = A + static_cast<size_t>(m) * lda;
    float* c = C + static_cast<size_t>(m) * ldc;
    for (int n = 0; n < N; n++) {
      float s = dot_scalar(a, B + static_cast<size_t>(n) * ldb, K);
      if (bias) s += bias[n];
      c[n] = acc ? c[n] + s : s;
    }
  }
}

void axpy_rows_scalar(float* y, const float* X, int ldx, const float* coef,
                      int K, int N, const float* bias, bool acc) {
  for (int n = 0; n < N; n++) {
    float s = bias ? bias[n] : 0.f;
    if (acc) s += y[n];
    y[n] = s;
  }
  for (int k = 0; k < K; k++) {
    const float c = coef[k];
    const float* x = X + static_cast<size_t>(k) * ldx;
    for (int n = 0; n < N; n++) y[n] += c * x[n];
  }
}

void tanh_scalar(float* x, int n) {
  for (int i = 0; i < n; i++) x[i] = std::tanh(x[i]);
}

void sigmoid_scalar(float* x, int n) {
  for (int i = 0; i < n; i++) x[i] = 1.f / (1.f + std::exp(-x[i]));
}

void relu_scalar(float* x, int n) {
  for (int i = 0; i < n; i++) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void mul_scalar(float* a, const float* b, int n) {
  for (int i = 0; i < n; i++) a[i] *= b[i];
}

void lstm_update_scalar(float* c, float* h, const float* gi, const float* gf,
                        const float* gg, const float* go, int n) {
  for (int i = 0; i < n; i++) {
    c[i] = gf[i] * c[i] + gi[i] * gg[i];
    h[i] = go[i] * std::tanh(c[i]);
  }
}

}  // namespace

namespace detail {
const Ops scalar_ops = {
    "scalar",      dot_scalar,  gemm_bt_scalar, axpy_rows_scalar,
    tanh_scalar,   sigmoid_scalar, relu_scalar, mul_scalar,
    lstm_update_scalar,
};
}  // namespace detail

}  // namespace melstream::simd
