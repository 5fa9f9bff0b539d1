// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// AVX2+FMA kernels. Compiled with -mavx2 -mfma in this translation unit
// only; dispatch guarantees they never run on CPUs without the features.
//
// tanh/sigmoid use a Cephes-style expf polynomial (error < 4e-6 absolute,
// ~1e-7 relative away from the tanh small-argument seam).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "melstream/simd.hpp"

namespace melstream::simd {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, lo);
  lo = _mm_add_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

float dot_avx2(const float* a, const float* b, int n) {
  __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps(), acc3 = _mm256_setzero_ps();
  int i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16), _mm256_loadu_ps(b + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24), _mm256_loadu_ps(b + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
  for (; i < n; i++) s += a[i] * b[i];
  return s;
}

// C tile of 4 A rows x 2 B rows; the B pair stays hot while A streams.
void gemm_bt_avx2(const float* A, int lda, const float* B, int ldb,
                  const float* bias, float* C, int ldc, int M, int N, int K,
                  bool acc) {
  const int K8 = (K + 7) & ~7;
  int n = 0;
  for (; n + 2 <= N; n += 2) {
    const float* b0 = B + static_cast<size_t>(n) * ldb;
    const float* b1 = b0 + ldb;
    int m = 0;
    for (; m + 4 <= M; m += 4) {
      const float* a0 = A + static_cast<size_t>(m) * lda;
      const float* a1 = a0 + lda;
      const float* a2 = a1 + lda;
      const float* a3 = a2 + lda;
      __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
      __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
      __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
      __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
      for (int k = 0; k < K8; k += 8) {
        __m256 vb0 = _mm256_loadu_ps(b0 + k);
        __m256 vb1 = _mm256_loadu_ps(b1 + k);
        __m256 va = _mm256_loadu_ps(a0 + k);
        c00 = _mm256_fmadd_ps(va, vb0, c00);
        c01 = _mm256_fmadd_ps(va, vb1, c01);
        va = _mm256_loadu_ps(a1 + k);
        c10 = _mm256_fmadd_ps(va, vb0, c10);
        c11 = _mm256_fmadd_ps(va, vb1, c11);
        va = _mm256_loadu_ps(a2 + k);
        c20 = _mm256_fmadd_ps(va, vb0, c20);
        c21 = _mm256_fmadd_ps(va, vb1, c21);
        va = _mm256_loadu_ps(a3 + k);
        c30 = _mm256_fmadd_ps(va, vb0, c30);
        c31 = _mm256_fmadd_ps(va, vb1, c31);
      }
      const float bb0 = bias ? bias[n] : 0.f;
      const float bb1 = bias ? bias[n + 1] : 0.f;
      float* c = C + static_cast<size_t>(m) * ldc + n;
      float s00 = hsum(c00) + bb0, s01 = hsum(c01) + bb1;
      float s10 = hsum(c10) + bb0, s11 = hsum(c11) + bb1;
      float s20 = hsum(c20) + bb0, s21 = hsum(c21) + bb1;
      float s30 = hsum(c30) + bb0, s31 = hsum(c31) + bb1;
      if (acc) {
        c[0] += s00; c[1] += s01;
        c[ldc] += s10; c[ldc + 1] += s11;
        c[2 * ldc] += s20; c[2 * ldc + 1] += s21;
        c[3 * ldc] += s30; c[3 * ldc + 1] += s31;
      } else {
        c[0] = s00; c[1] = s01;
        c[ldc] = s10; c[ldc + 1] = s11;
        c[2 * ldc] = s20; c[2 * ldc + 1] = s21;
        c[3 * ldc] = s30; c[3 * ldc + 1] = s31;
      }
    }
    for (; m < M; m++) {
      const float* a = A + static_cast<size_t>(m) * lda;
      float* c = C + static_cast<size_t>(m) * ldc + n;
      for (int j = 0; j < 2; j++) {
        float s = dot_avx2(a, B + static_cast<size_t>(n + j) * ldb, K);
        if (bias) s += bias[n + j];
        c[j] = acc ? c[j] + s : s;
      }
    }
  }
  for (; n < N; n++) {
    const float* b = B + static_cast<size_t>(n) * ldb;
    for (int m = 0; m < M; m++) {
      float s = dot_avx2(A + static_cast<size_t>(m) * lda, b, K);
      if (bias) s += bias[n];
      float* c = C + static_cast<size_t>(m) * ldc + n;
      *c = acc ? *c + s : s;
    }
  }
}

void axpy_rows_avx2(float* y, const float* X, int ldx, const float* coef,
                    int K, int N, const float* bias, bool acc) {
  const int N8 = (N + 7) & ~7;
  for (int base = 0; base < N8; base += 64) {
    const int w = (N8 - base) < 64 ? (N8 - base) : 64;
    const int nv = w / 8;
    __m256 v[8];
    for (int j = 0; j < nv; j++) {
      v[j] = bias ? _mm256_loadu_ps(bias + base + j * 8) : _mm256_setzero_ps();
      if (acc) v[j] = _mm256_add_ps(v[j], _mm256_loadu_ps(y + base + j * 8));
    }
    for (int k = 0; k < K; k++) {
      const __m256 c = _mm256_set1_ps(coef[k]);
      const float* x = X + static_cast<size_t>(k) * ldx + base;
      for (int j = 0; j < nv; j++)
        v[j] = _mm256_fmadd_ps(c, _mm256_loadu_ps(x + j * 8), v[j]);
    }
    for (int j = 0; j < nv; j++) _mm256_storeu_ps(y + base + j * 8, v[j]);
  }
}

// expf on [-87.3, 88.7], Cephes polynomial.
inline __m256 exp_avx2(__m256 x) {
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  x = _mm256_min_ps(x, _mm256_set1_ps(88.72283f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-87.33654f));
  __m256 fx = _mm256_round_ps(_mm256_mul_ps(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);
  __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, _mm256_set1_ps(1.f)));
  __m256i n = _mm256_cvtps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

inline __m256 sigmoid_avx2_v(__m256 x) {
  __m256 e = exp_avx2(_mm256_sub_ps(_mm256_setzero_ps(), x));
  return _mm256_div_ps(_mm256_set1_ps(1.f), _mm256_add_ps(_mm256_set1_ps(1.f), e));
}

// Cephes tanhf: odd polynomial below 0.625, exp form above.
inline __m256 tanh_avx2_v(__m256 x) {
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 ax = _mm256_and_ps(x, abs_mask);
  __m256 sign = _mm256_andnot_ps(abs_mask, x);

  __m256 z = _mm256_mul_ps(ax, ax);
  __m256 p = _mm256_set1_ps(-5.70498872745e-3f);
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(2.06390887954e-2f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(-5.37397155531e-2f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(1.33314422036e-1f));
  p = _mm256_fmadd_ps(p, z, _mm256_set1_ps(-3.33332819422e-1f));
  __m256 small = _mm256_fmadd_ps(_mm256_mul_ps(p, z), ax, ax);

  __m256 e = exp_avx2(_mm256_add_ps(ax, ax));
  __m256 big = _mm256_sub_ps(
      _mm256_set1_ps(1.f),
      _mm256_div_ps(_mm256_set1_ps(2.f),
                    _mm256_add_ps(e, _mm256_set1_ps(1.f))));

  __m256 use_big = _mm256_cmp_ps(ax, _mm256_set1_ps(0.625f), _CMP_GE_OQ);
  __m256 r = _mm256_blendv_ps(small, big, use_big);
  return _mm256_or_ps(r, sign);
}

void tanh_avx2(float* x, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, tanh_avx2_v(_mm256_loadu_ps(x + i)));
  if (i < n) {
    float tmp[8] = {0};
    for (int j = i; j < n; j++) tmp[j - i] = x[j];
    __m256 r = tanh_avx2_v(_mm256_loadu_ps(tmp));
    _mm256_storeu_ps(tmp, r);
    for (int j = i; j < n; j++) x[j] = tmp[j - i];
  }
}

void sigmoid_avx2(float* x, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, sigmoid_avx2_v(_mm256_loadu_ps(x + i)));
  if (i < n) {
    float tmp[8] = {0};
    for (int j = i; j < n; j++) tmp[j - i] = x[j];
    __m256 r = sigmoid_avx2_v(_mm256_loadu_ps(tmp));
    _mm256_storeu_ps(tmp, r);
    for (int j = i; j < n; j++) x[j] = tmp[j - i];
  }
}

void relu_avx2(float* x, int n) {
  const __m256 zero = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; i++) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void mul_avx2(float* a, const float* b, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(a + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; i++) a[i] *= b[i];
}

void lstm_update_avx2(float* c, float* h, const float* gi, const float* gf,
                      const float* gg, const float* go, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vc = _mm256_loadu_ps(c + i);
    vc = _mm256_fmadd_ps(_mm256_loadu_ps(gf + i), vc,
                         _mm256_mul_ps(_mm256_loadu_ps(gi + i), _mm256_loadu_ps(gg + i)));
    _mm256_storeu_ps(c + i, vc);
    _mm256_storeu_ps(h + i, _mm256_mul_ps(_mm256_loadu_ps(go + i), tanh_avx2_v(vc)));
  }
  for (; i < n; i++) {
    c[i] = gf[i] * c[i] + gi[i] * gg[i];
    float t = c[i];
    tanh_avx2(&t, 1);
    h[i] = go[i] * t;
  }
}

}  // namespace

namespace detail {
const Ops avx2_ops = {
    "avx2",     dot_avx2,  gemm_bt_avx2, axpy_rows_avx2,
    tanh_avx2,  sigmoid_avx2, relu_avx2, mul_avx2,
    lstm_update_avx2,
};
}  // namespace detail

}  // namespace melstream::simd

#endif  // x86_64
