// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Scalar/vector equivalence for every kernel in every available lane, plus
// double-precision oracles for the reductions.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "melstream/common.hpp"
#include "melstream/rng.hpp"
#include "melstream/simd.hpp"

using namespace melstream;
using simd::Lane;

namespace {

PackedMat random_mat(int rows, int cols, uint64_t seed, float range = 1.f) {
  PackedMat m(rows, cols);
  SplitMix64 rng(seed);
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++) m.row(r)[c] = rng.next_uniform(range);
  return m;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST_CASE("lane dispatch reports an active lane and scalar is always present") {
  CHECK(simd::lane_available(Lane::scalar));
  const auto lanes = simd::available_lanes();
  CHECK(!lanes.empty());
  for (Lane l : lanes) CHECK(simd::ops(l).name != nullptr);
  CHECK_THROWS_AS(simd::lane_from_name("avx1024"), ConfigError);
  CHECK(simd::lane_from_name("scalar") == Lane::scalar);
}

TEST_CASE("dot agrees with a double oracle in every lane") {
  for (Lane lane : simd::available_lanes()) {
    const auto& k = simd::ops(lane);
    SplitMix64 rng(7);
    for (int n : {1, 7, 8, 15, 64, 257, 801}) {
      std::vector<float> a(n), b(n);
      double want = 0.0;
      for (int i = 0; i < n; i++) {
        a[i] = rng.next_uniform(1.f);
        b[i] = rng.next_uniform(1.f);
        want += static_cast<double>(a[i]) * b[i];
      }
      CHECK(rel_err(k.dot(a.data(), b.data(), n), want) < 1e-5);
    }
  }
}

TEST_CASE("gemm_bt matches the scalar lane and a double oracle") {
  const auto& ref = simd::ops(Lane::scalar);
  for (Lane lane : simd::available_lanes()) {
    if (lane == Lane::scalar) continue;
    const auto& k = simd::ops(lane);
    for (auto [M, N, K] : std::vector<std::array<int, 3>>{
             {1, 1, 1}, {3, 5, 17}, {4, 4, 16}, {80, 64, 257}, {13, 1408 % 97, 449}}) {
      PackedMat A = random_mat(M, K, 11 + M);
      PackedMat B = random_mat(N, K, 23 + N);
      AlignedBuf bias(round_up16(N));
      SplitMix64 rng(5);
      for (int i = 0; i < N; i++) bias[i] = rng.next_uniform(0.5f);

      PackedMat C0(M, N), C1(M, N);
      ref.gemm_bt(A.row(0), A.stride, B.row(0), B.stride, bias.data(), C0.row(0),
                  C0.stride, M, N, K, false);
      k.gemm_bt(A.row(0), A.stride, B.row(0), B.stride, bias.data(), C1.row(0),
                C1.stride, M, N, K, false);
      for (int m = 0; m < M; m++)
        for (int n = 0; n < N; n++) {
          double want = bias[n];
          for (int kk = 0; kk < K; kk++)
            want += static_cast<double>(A.row(m)[kk]) * B.row(n)[kk];
          CHECK(rel_err(C0.row(m)[n], want) < 1e-5);
          CHECK(rel_err(C1.row(m)[n], want) < 1e-5);
        }

      // accumulate mode adds on top of existing values
      k.gemm_bt(A.row(0), A.stride, B.row(0), B.stride, nullptr, C1.row(0),
                C1.stride, M, N, K, true);
      for (int m = 0; m < M; m++)
        for (int n = 0; n < N; n++) {
          const double want = 2.0 * C0.row(m)[n] - bias[n];
          CHECK(std::abs(C1.row(m)[n] - want) < 1e-3 * (1.0 + std::abs(want)));
        }
    }
  }
}

TEST_CASE("axpy_rows matches scalar across lanes") {
  const auto& ref = simd::ops(Lane::scalar);
  for (Lane lane : simd::available_lanes()) {
    if (lane == Lane::scalar) continue;
    const auto& k = simd::ops(lane);
    for (auto [K, N] : std::vector<std::array<int, 2>>{{1, 1}, {5, 33}, {128, 512}, {80, 257}}) {
      PackedMat X = random_mat(K, N, 31 + K);
      std::vector<float> coef(K);
      SplitMix64 rng(17);
      for (int i = 0; i < K; i++) coef[i] = rng.next_uniform(1.f);
      AlignedBuf bias(round_up16(N));
      for (int i = 0; i < N; i++) bias[i] = rng.next_uniform(0.5f);

      PackedMat y0(1, N), y1(1, N);
      ref.axpy_rows(y0.row(0), X.row(0), X.stride, coef.data(), K, N, bias.data(), false);
      k.axpy_rows(y1.row(0), X.row(0), X.stride, coef.data(), K, N, bias.data(), false);
      for (int n = 0; n < N; n++)
        CHECK(rel_err(y1.row(0)[n], y0.row(0)[n]) < 1e-5);

      ref.axpy_rows(y0.row(0), X.row(0), X.stride, coef.data(), K, N, nullptr, true);
      k.axpy_rows(y1.row(0), X.row(0), X.stride, coef.data(), K, N, nullptr, true);
      for (int n = 0; n < N; n++)
        CHECK(rel_err(y1.row(0)[n], y0.row(0)[n]) < 1e-5);
    }
  }
}

TEST_CASE("tanh and sigmoid stay within 4e-6 of libm in every lane") {
  for (Lane lane : simd::available_lanes()) {
    const auto& k = simd::ops(lane);
    SplitMix64 rng(3);
    std::vector<float> x(4097);
    for (auto& v : x) v = rng.next_uniform(12.f);
    x[0] = 0.f;
    x[1] = -0.624f;
    x[2] = 0.626f;
    x[3] = 30.f;
    x[4] = -30.f;

    std::vector<float> t = x, s = x;
    k.tanh_ip(t.data(), static_cast<int>(t.size()));
    k.sigmoid_ip(s.data(), static_cast<int>(s.size()));
    for (size_t i = 0; i < x.size(); i++) {
      const double wt = std::tanh(static_cast<double>(x[i]));
      const double ws = 1.0 / (1.0 + std::exp(-static_cast<double>(x[i])));
      CHECK(std::abs(t[i] - wt) < 4e-6);
      CHECK(std::abs(s[i] - ws) < 4e-6);
      CHECK(s[i] >= 0.f);
      CHECK(s[i] <= 1.f);
      CHECK(std::abs(t[i]) <= 1.f);
    }
  }
}

TEST_CASE("sigmoid is monotone on sorted input") {
  for (Lane lane : simd::available_lanes()) {
    const auto& k = simd::ops(lane);
    std::vector<float> x;
    for (int i = 0; i <= 1200; i++) x.push_back(-6.f + 0.01f * i);
    k.sigmoid_ip(x.data(), static_cast<int>(x.size()));
    for (size_t i = 1; i < x.size(); i++) CHECK(x[i] >= x[i - 1]);
  }
}

TEST_CASE("relu, mul and lstm_update match scalar semantics") {
  for (Lane lane : simd::available_lanes()) {
    const auto& k = simd::ops(lane);
    SplitMix64 rng(9);
    const int n = 147;
    std::vector<float> a(n), b(n), c(n), h(n), gi(n), gf(n), gg(n), go(n);
    for (int i = 0; i < n; i++) {
      a[i] = rng.next_uniform(2.f);
      b[i] = rng.next_uniform(2.f);
      c[i] = rng.next_uniform(2.f);
      gi[i] = rng.next_float();
      gf[i] = rng.next_float();
      gg[i] = rng.next_uniform(1.f);
      go[i] = rng.next_float();
    }
    std::vector<float> r = a;
    k.relu_ip(r.data(), n);
    for (int i = 0; i < n; i++) CHECK(r[i] == (a[i] > 0.f ? a[i] : 0.f));

    std::vector<float> m = a;
    k.mul_ip(m.data(), b.data(), n);
    for (int i = 0; i < n; i++) CHECK(m[i] == doctest::Approx(a[i] * b[i]));

    std::vector<float> c2 = c;
    k.lstm_update(c2.data(), h.data(), gi.data(), gf.data(), gg.data(), go.data(), n);
    for (int i = 0; i < n; i++) {
      const double wc = static_cast<double>(gf[i]) * c[i] + static_cast<double>(gi[i]) * gg[i];
      CHECK(std::abs(c2[i] - wc) < 1e-5);
      CHECK(std::abs(h[i] - go[i] * std::tanh(wc)) < 1e-5);
    }
  }
}

TEST_CASE("relu examples") {
  float v[2] = {-1.f, 2.f};
  simd::ops().relu_ip(v, 2);
  CHECK(v[0] == 0.f);
  CHECK(v[1] == 2.f);
  float z[2] = {0.f, 0.f};
  simd::ops().sigmoid_ip(z, 1);
  simd::ops().tanh_ip(z + 1, 1);
  CHECK(z[0] == doctest::Approx(0.5f));
  CHECK(z[1] == doctest::Approx(0.f));
}
