// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Runtime-dispatched SIMD kernels. Every primitive has a scalar reference
// implementation plus AVX2 / AVX-512 (x86) and NEON (aarch64) variants.
// The active variant is picked once at startup from CPU features and can be
// overridden via set_lane() (used by tests, the CLI --simd flag, and the
// scalar/vector equivalence suite).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melstream::simd {

enum class Lane { scalar, avx2, avx512, neon };

// Kernel contracts
// ----------------
// gemm_bt: C[M,N] = A[M,K] * B[N,K]^T (+ bias[N]) (+ C when `acc`).
//   A rows at stride lda, B rows at stride ldb, C rows at stride ldc.
//   Vector lanes may read A and B rows through round_up16(K); callers must
//   zero-pad both through that bound (PackedMat guarantees it).
// axpy_rows: y[0:N] (+)= sum_k coef[k] * X[k*ldx + 0:N] (+ bias[N]).
//   Vector lanes may read rows of X and y through round_up16(N).
// dot: exact-length dot product, no padding requirement.
// tanh/sigmoid: in-place over n values. Vector lanes use a polynomial
//   exp-based approximation, within 4e-6 absolute of the scalar lane.
// lstm_update: c = f*c + i*g; h = o*tanh(c), over n values.
struct Ops {
  const char* name;
  float (*dot)(const float* a, const float* b, int n);
  void (*gemm_bt)(const float* A, int lda, const float* B, int ldb,
                  const float* bias, float* C, int ldc, int M, int N, int K,
                  bool acc);
  void (*axpy_rows)(float* y, const float* X, int ldx, const float* coef,
                    int K, int N, const float* bias, bool acc);
  void (*tanh_ip)(float* x, int n);
  void (*sigmoid_ip)(float* x, int n);
  void (*relu_ip)(float* x, int n);
  void (*mul_ip)(float* a, const float* b, int n);
  void (*lstm_update)(float* c, float* h, const float* gi, const float* gf,
                      const float* gg, const float* go, int n);
};

const Ops& ops();                  // active lane
const Ops& ops(Lane lane);         // specific lane; throws if unavailable
Lane active_lane();
void set_lane(Lane lane);          // throws if unavailable
bool lane_available(Lane lane);
std::vector<Lane> available_lanes();
const char* lane_name(Lane lane);
Lane lane_from_name(const std::string& name);  // "auto" picks the best

namespace detail {
extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
extern const Ops avx512_ops;
#endif
#if defined(__aarch64__) || defined(__ARM_NEON)
extern const Ops neon_ops;
#endif
}  // namespace detail

}  // namespace melstream::simd
