// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// NEON kernels for aarch64. Kept deliberately simple; transcendentals fall
// back to libm per element.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "melstream/simd.hpp"

namespace melstream::simd {
namespace {

float dot_neon(const float* a, const float* b, int n) {
  float32x4_t acc0 = vdupq_n_f32(0.f), acc1 = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float s = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; i++) s += a[i] * b[i];
  return s;
}

void gemm_bt_neon(const float* A, int lda, const float* B, int ldb,
                  const float* bias, float* C, int ldc, int M, int N, int K,
                  bool acc) {
  const int K4 = (K + 3) & ~3;
  int n = 0;
  for (; n + 2 <= N; n += 2) {
    const float* b0 = B + static_cast<size_t>(n) * ldb;
    const float* b1 = b0 + ldb;
    int m = 0;
    for (; m + 2 <= M; m += 2) {
      const float* a0 = A + static_cast<size_t>(m) * lda;
      const float* a1 = a0 + lda;
      float32x4_t c00 = vdupq_n_f32(0.f), c01 = vdupq_n_f32(0.f);
      float32x4_t c10 = vdupq_n_f32(0.f), c11 = vdupq_n_f32(0.f);
      for (int k = 0; k < K4; k += 4) {
        float32x4_t vb0 = vld1q_f32(b0 + k);
        float32x4_t vb1 = vld1q_f32(b1 + k);
        float32x4_t va0 = vld1q_f32(a0 + k);
        float32x4_t va1 = vld1q_f32(a1 + k);
        c00 = vfmaq_f32(c00, va0, vb0);
        c01 = vfmaq_f32(c01, va0, vb1);
        c10 = vfmaq_f32(c10, va1, vb0);
        c11 = vfmaq_f32(c11, va1, vb1);
      }
      const float bb0 = bias ? bias[n] : 0.f;
      const float bb1 = bias ? bias[n + 1] : 0.f;
      float* c = C + static_cast<size_t>(m) * ldc + n;
      float s00 = vaddvq_f32(c00) + bb0, s01 = vaddvq_f32(c01) + bb1;
      float s10 = vaddvq_f32(c10) + bb0, s11 = vaddvq_f32(c11) + bb1;
      if (acc) {
        c[0] += s00; c[1] += s01;
        c[ldc] += s10; c[ldc + 1] += s11;
      } else {
        c[0] = s00; c[1] = s01;
        c[ldc] = s10; c[ldc + 1] = s11;
      }
    }
    for (; m < M; m++) {
      const float* a = A + static_cast<size_t>(m) * lda;
      float* c = C + static_cast<size_t>(m) * ldc + n;
      for (int j = 0; j < 2; j++) {
        float s = dot_neon(a, B + static_cast<size_t>(n + j) * ldb, K);
        if (bias) s += bias[n + j];
        c[j] = acc ? c[j] + s : s;
      }
    }
  }
  for (; n < N; n++) {
    const float* b = B + static_cast<size_t>(n) * ldb;
    for (int m = 0; m < M; m++) {
      float s = dot_neon(A + static_cast<size_t>(m) * lda, b, K);
      if (bias) s += bias[n];
      float* c = C + static_cast<size_t>(m) * ldc + n;
      *c = acc ? *c + s : s;
    }
  }
}

void axpy_rows_neon(float* y, const float* X, int ldx, const float* coef,
                    int K, int N, const float* bias, bool acc) {
  const int N4 = (N + 3) & ~3;
  for (int base = 0; base < N4; base += 32) {
    const int w = (N4 - base) < 32 ? (N4 - base) : 32;
    const int nv = w / 4;
    float32x4_t v[8];
    for (int j = 0; j < nv; j++) {
      v[j] = bias ? vld1q_f32(bias + base + j * 4) : vdupq_n_f32(0.f);
      if (acc) v[j] = vaddq_f32(v[j], vld1q_f32(y + base + j * 4));
    }
    for (int k = 0; k < K; k++) {
      const float32x4_t c = vdupq_n_f32(coef[k]);
      const float* x = X + static_cast<size_t>(k) * ldx + base;
      for (int j = 0; j < nv; j++) v[j] = vfmaq_f32(v[j], c, vld1q_f32(x + j * 4));
    }
    for (int j = 0; j < nv; j++) vst1q_f32(y + base + j * 4, v[j]);
  }
}

void tanh_neon(float* x, int n) {
  for (int i = 0; i < n; i++) x[i] = std::tanh(x[i]);
}

void sigmoid_neon(float* x, int n) {
  for (int i = 0; i < n; i++) x[i] = 1.f / (1.f + std::exp(-x[i]));
}

void relu_neon(float* x, int n) {
  const float32x4_t zero = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmaxq_f32(vld1q_f32(x + i), zero));
  for (; i < n; i++) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void mul_neon(float* a, const float* b, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(a + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  for (; i < n; i++) a[i] *= b[i];
}

void lstm_update_neon(float* c, float* h, const float* gi, const float* gf,
                      const float* gg, const float* go, int n) {
  for (int i = 0; i < n; i++) {
    c[i] = gf[i] * c[i] + gi[i] * gg[i];
    h[i] = go[i] * std::tanh(c[i]);
  }
}

}  // namespace

namespace detail {
const Ops neon_ops = {
    "neon",     dot_neon,  gemm_bt_neon, axpy_rows_neon,
    tanh_neon,  sigmoid_neon, relu_neon, mul_neon,
    lstm_update_neon,
};
}  // namespace detail

}  // namespace melstream::simd

#endif  // __aarch64__
