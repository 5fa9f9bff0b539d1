// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Oracle tests for the dense kernels: every op is checked against an
// independent double-precision loop implementation written here.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "melstream/nn.hpp"
#include "melstream/rng.hpp"

using namespace melstream;
using nn::ConvMode;

namespace {

Tensor random_tensor(std::vector<int64_t> dims, uint64_t seed, float range = 1.f) {
  Tensor t(std::move(dims));
  SplitMix64 rng(seed);
  for (int64_t i = 0; i < t.numel(); i++) t[i] = rng.next_uniform(range);
  return t;
}

// naive triple-loop linear oracle in double
std::vector<double> linear_oracle(const Tensor& x, const Tensor& W, const Tensor& b) {
  const int64_t in = W.dim(1), out = W.dim(0), rows = x.numel() / in;
  std::vector<double> y(rows * out);
  for (int64_t r = 0; r < rows; r++)
    for (int64_t o = 0; o < out; o++) {
      double s = b[o];
      for (int64_t i = 0; i < in; i++)
        s += static_cast<double>(x[r * in + i]) * W[o * in + i];
      y[r * out + o] = s;
    }
  return y;
}

// scalar gate-by-gate LSTM oracle in double
struct LstmOracle {
  std::vector<double> h, c;
  explicit LstmOracle(int hid) : h(hid, 0.0), c(hid, 0.0) {}
  void step(const nn::LstmParams& p, const float* x) {
    const int hid = p.hid, in = p.in;
    std::vector<double> g(4 * hid);
    for (int j = 0; j < 4 * hid; j++) {
      double s = p.b[j];
      for (int i = 0; i < in; i++) s += static_cast<double>(p.wx[j * in + i]) * x[i];
      for (int i = 0; i < hid; i++) s += static_cast<double>(p.wh[j * hid + i]) * h[i];
      g[j] = s;
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int i = 0; i < hid; i++) {
      const double gi = sig(g[i]), gf = sig(g[hid + i]);
      const double gg = std::tanh(g[2 * hid + i]), go = sig(g[3 * hid + i]);
      c[i] = gf * c[i] + gi * gg;
      h[i] = go * std::tanh(c[i]);
    }
  }
};

nn::LstmParams random_lstm(int in, int hid, uint64_t seed) {
  return nn::LstmParams::make(random_tensor({4 * hid, in}, seed, 0.5f),
                              random_tensor({4 * hid, hid}, seed + 1, 0.5f),
                              random_tensor({4 * hid}, seed + 2, 0.5f));
}

}  // namespace

TEST_CASE("linear: identity and forced arithmetic") {
  Tensor x = Tensor::from_data({1, 2}, {1.f, 0.f});
  Tensor I = Tensor::from_data({2, 2}, {1.f, 0.f, 0.f, 1.f});
  Tensor z = Tensor::from_data({2}, {0.f, 0.f});
  Tensor y = nn::linear(x, I, z);
  CHECK(y[0] == 1.f);
  CHECK(y[1] == 0.f);

  Tensor x2 = Tensor::from_data({1, 2}, {1.f, 2.f});
  Tensor W = Tensor::from_data({1, 2}, {1.f, 1.f});
  Tensor b = Tensor::from_data({1}, {-3.f});
  CHECK(nn::linear(x2, W, b)[0] == 0.f);
}

TEST_CASE("linear: seeded random matches the naive oracle") {
  Tensor x = random_tensor({4, 8}, 0);
  Tensor W = random_tensor({5, 8}, 1);
  Tensor b = random_tensor({5}, 2);
  OpCounter c;
  Tensor y = nn::linear(x, W, b, &c);
  const auto want = linear_oracle(x, W, b);
  for (int64_t i = 0; i < y.numel(); i++)
    CHECK(std::abs(y[i] - want[i]) <= 1e-6 * std::max(1.0, std::abs(want[i])));
  CHECK(c.macs == 4u * 5u * 8u);
  CHECK_THROWS_AS(nn::linear(random_tensor({4, 7}, 3), W, b), ShapeError);
}

TEST_CASE("layer_norm: constant row maps to beta, normalized row is fixed") {
  Tensor x = Tensor::from_data({1, 3}, {2.5f, 2.5f, 2.5f});
  Tensor g = Tensor::from_data({3}, {1.f, 1.f, 1.f});
  Tensor beta = Tensor::from_data({3}, {0.f, 0.f, 0.f});
  Tensor y = nn::layer_norm(x, g, beta);
  for (int i = 0; i < 3; i++) CHECK(y[i] == doctest::Approx(0.f));

  Tensor x2 = Tensor::from_data({1, 2}, {-1.f, 1.f});
  Tensor g2 = Tensor::from_data({2}, {1.f, 1.f});
  Tensor b2 = Tensor::from_data({2}, {0.f, 0.f});
  Tensor y2 = nn::layer_norm(x2, g2, b2, 1e-12f);
  CHECK(y2[0] == doctest::Approx(-1.f).epsilon(1e-4));
  CHECK(y2[1] == doctest::Approx(1.f).epsilon(1e-4));
}

TEST_CASE("layer_norm: random rows have zero mean and unit variance") {
  Tensor x = random_tensor({6, 33}, 40, 3.f);
  Tensor g = Tensor::from_data({33}, std::vector<float>(33, 1.f));
  Tensor b = Tensor::from_data({33}, std::vector<float>(33, 0.f));
  Tensor y = nn::layer_norm(x, g, b);
  for (int r = 0; r < 6; r++) {
    double mean = 0, var = 0;
    for (int i = 0; i < 33; i++) mean += y.at2(r, i);
    mean /= 33;
    for (int i = 0; i < 33; i++) var += (y.at2(r, i) - mean) * (y.at2(r, i) - mean);
    var /= 33;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("conv1d: impulse response reproduces the reversed kernel tail") {
  const int k = 4, L = 6;
  Tensor x({L, 1});
  x.at2(0, 0) = 1.f;
  Tensor kernel({1, 1, k});
  for (int j = 0; j < k; j++) kernel[j] = static_cast<float>(j + 1);
  Tensor y = nn::conv1d(x, kernel, ConvMode::causal_past);
  // y[t] = K[k-1-t] for t < k, never referencing x before t=0
  for (int t = 0; t < L; t++)
    CHECK(y.at2(t, 0) == (t < k ? kernel[k - 1 - t] : 0.f));
}

TEST_CASE("conv1d: k=1 identity kernel is the identity") {
  Tensor x = random_tensor({9, 3}, 5);
  Tensor kernel({3, 3, 1});
  for (int o = 0; o < 3; o++) kernel.at3(o, o, 0) = 1.f;
  Tensor y = nn::conv1d(x, kernel, ConvMode::causal_past);
  for (int64_t i = 0; i < x.numel(); i++) CHECK(y[i] == x[i]);
}

TEST_CASE("conv1d: causal outputs before a perturbation are bit-exact") {
  const int L = 40, in = 4, out = 3, k = 6;
  Tensor x = random_tensor({L, in}, 6);
  Tensor kernel = random_tensor({out, in, k}, 7);
  Tensor y0 = nn::conv1d(x, kernel, ConvMode::causal_past);
  const int t0 = 17;
  Tensor x1 = x;
  for (int i = 0; i < in; i++) x1.at2(t0, i) += 1.f;
  Tensor y1 = nn::conv1d(x1, kernel, ConvMode::causal_past);
  for (int t = 0; t < t0; t++)
    for (int o = 0; o < out; o++) CHECK(y0.at2(t, o) == y1.at2(t, o));
  bool changed = false;
  for (int o = 0; o < out; o++) changed |= y0.at2(t0, o) != y1.at2(t0, o);
  CHECK(changed);
}

TEST_CASE("conv1d: random case against a double oracle, both modes") {
  SplitMix64 seeds(100);
  for (int rep = 0; rep < 20; rep++) {
    const int L = 5 + static_cast<int>(seeds.next() % 20);
    const int in = 1 + static_cast<int>(seeds.next() % 5);
    const int out = 1 + static_cast<int>(seeds.next() % 5);
    const int k = 1 + 2 * static_cast<int>(seeds.next() % 3);
    Tensor x = random_tensor({L, in}, seeds.next());
    Tensor kernel = random_tensor({out, in, k}, seeds.next());
    for (ConvMode mode : {ConvMode::causal_past, ConvMode::same_centered}) {
      Tensor y = nn::conv1d(x, kernel, mode);
      const int off = mode == ConvMode::causal_past ? k - 1 : k / 2;
      for (int t = 0; t < L; t++)
        for (int o = 0; o < out; o++) {
          double s = 0;
          for (int j = 0; j < k; j++) {
            const int src = t - off + j;
            if (src < 0 || src >= L) continue;
            for (int i = 0; i < in; i++)
              s += static_cast<double>(x.at2(src, i)) * kernel.at3(o, i, j);
          }
          CHECK(std::abs(y.at2(t, o) - s) <= 1e-5 * std::max(1.0, std::abs(s)));
        }
    }
  }
}

TEST_CASE("lstm_step: zero parameters give zero next state") {
  nn::LstmParams p = nn::LstmParams::make(Tensor({8, 2}), Tensor({8, 2}), Tensor({8}));
  nn::LstmState s(2);
  const float x[2] = {0.3f, -0.7f};
  nn::lstm_step(p, x, s);
  for (int i = 0; i < 2; i++) {
    CHECK(s.h[i] == 0.f);
    CHECK(s.c[i] == 0.f);
  }
}

TEST_CASE("lstm_step: saturated forget gate preserves the cell") {
  const int hid = 3;
  nn::LstmParams p = nn::LstmParams::make(Tensor({4 * hid, 1}), Tensor({4 * hid, hid}),
                                          Tensor({4 * hid}));
  for (int i = 0; i < hid; i++) {
    p.b[hid + i] = 30.f;   // forget gate -> 1
    p.b[i] = -30.f;        // input gate -> 0
  }
  nn::LstmState s(hid);
  s.c = {0.4f, -1.2f, 2.f};
  const std::vector<float> v = s.c;
  const float x = 0.9f;
  nn::lstm_step(p, &x, s);
  for (int i = 0; i < hid; i++) CHECK(s.c[i] == doctest::Approx(v[i]).epsilon(1e-5));
}

TEST_CASE("lstm_step: random steps match the gate-by-gate oracle") {
  const int in = 5, hid = 7;
  nn::LstmParams p = random_lstm(in, hid, 200);
  nn::LstmState s(hid);
  LstmOracle oracle(hid);
  SplitMix64 rng(201);
  OpCounter c;
  for (int t = 0; t < 30; t++) {
    std::vector<float> x(in);
    for (auto& v : x) v = rng.next_uniform(1.f);
    nn::lstm_step(p, x.data(), s, &c);
    oracle.step(p, x.data());
    for (int i = 0; i < hid; i++) {
      CHECK(std::abs(s.h[i] - oracle.h[i]) < 1e-5);
      CHECK(std::abs(s.c[i] - oracle.c[i]) < 1e-5);
    }
  }
  CHECK(c.macs == 30u * 4u * hid * (in + hid));
}

TEST_CASE("lstm_seq: length one equals a single step") {
  const int in = 3, hid = 4;
  nn::LstmParams p = random_lstm(in, hid, 300);
  Tensor x = random_tensor({1, in}, 301);
  Tensor y = nn::lstm_seq(x, p, nullptr);
  nn::LstmState s(hid);
  nn::lstm_step(p, x.data(), s);
  for (int i = 0; i < hid; i++) CHECK(y[i] == s.h[i]);
}

TEST_CASE("lstm_seq: tied bidirectional params on palindromic input") {
  const int in = 2, hid = 5, L = 9;
  nn::LstmParams p = random_lstm(in, hid, 400);
  Tensor x({L, in});
  SplitMix64 rng(401);
  for (int t = 0; t <= L / 2; t++)
    for (int i = 0; i < in; i++) {
      const float v = rng.next_uniform(1.f);
      x.at2(t, i) = v;
      x.at2(L - 1 - t, i) = v;
    }
  Tensor y = nn::lstm_seq(x, p, &p);
  // out[L-1-t] equals out[t] with the forward/backward halves swapped
  for (int t = 0; t < L; t++)
    for (int i = 0; i < hid; i++) {
      CHECK(y.at2(t, i) == y.at2(L - 1 - t, hid + i));
      CHECK(y.at2(t, hid + i) == y.at2(L - 1 - t, i));
    }
}

TEST_CASE("lstm_seq: forward outputs before a perturbation are bit-exact") {
  const int in = 3, hid = 6, L = 25, t0 = 11;
  nn::LstmParams p = random_lstm(in, hid, 500);
  Tensor x = random_tensor({L, in}, 501);
  Tensor y0 = nn::lstm_seq(x, p, nullptr);
  Tensor x1 = x;
  x1.at2(t0, 0) += 0.5f;
  Tensor y1 = nn::lstm_seq(x1, p, nullptr);
  for (int t = 0; t < t0; t++)
    for (int i = 0; i < hid; i++) CHECK(y0.at2(t, i) == y1.at2(t, i));

  // prefix determinism: truncated input reproduces the prefix bit-exactly
  Tensor xp({t0, in});
  for (int t = 0; t < t0; t++)
    for (int i = 0; i < in; i++) xp.at2(t, i) = x.at2(t, i);
  Tensor yp = nn::lstm_seq(xp, p, nullptr);
  for (int t = 0; t < t0; t++)
    for (int i = 0; i < hid; i++) CHECK(yp.at2(t, i) == y0.at2(t, i));
}

TEST_CASE("packed fast paths agree with the reference ops") {
  const int in = 10, hid = 12, B = 7;
  nn::LstmParams p = random_lstm(in, hid, 600);
  nn::PackedLstm packed = nn::PackedLstm::pack(p.wx, p.wh, p.b);

  // batch path: B independent sequences stepping together
  PackedMat X(B, in), G(B, 4 * hid), H(B, hid), C(B, hid);
  SplitMix64 rng(601);
  std::vector<nn::LstmState> states(B, nn::LstmState(hid));
  for (int t = 0; t < 5; t++) {
    for (int b = 0; b < B; b++)
      for (int i = 0; i < in; i++) X.row(b)[i] = rng.next_uniform(1.f);
    nn::lstm_xgates(packed, X.row(0), X.stride, B, G.row(0), G.stride, nullptr);
    nn::lstm_step_batch(packed, G.row(0), G.stride, H.row(0), H.stride, C.row(0),
                        C.stride, B, nullptr);
    for (int b = 0; b < B; b++) {
      nn::lstm_step(p, X.row(b), states[b]);
      for (int i = 0; i < hid; i++) {
        CHECK(std::abs(H.row(b)[i] - states[b].h[i]) < 2e-5);
        CHECK(std::abs(C.row(b)[i] - states[b].c[i]) < 2e-5);
      }
    }
  }
}

TEST_CASE("operation counts are value-independent, monotone and resettable") {
  Tensor W = random_tensor({6, 9}, 700);
  Tensor b = random_tensor({6}, 701);
  OpCounter c1, c2;
  nn::linear(random_tensor({3, 9}, 702), W, b, &c1);
  nn::linear(random_tensor({3, 9}, 703, 5.f), W, b, &c2);
  CHECK(c1 == c2);

  const uint64_t before = c1.macs;
  nn::linear(random_tensor({3, 9}, 704), W, b, &c1);
  CHECK(c1.macs == 2 * before);
  c1.reset();
  CHECK(c1.macs == 0u);
  CHECK(c1.adds == 0u);
  CHECK(c1.nonlins == 0u);
}

TEST_CASE("kernel property sweep against double oracles") {
  SplitMix64 seeds(800);
  for (int rep = 0; rep < 60; rep++) {
    const int rows = 1 + static_cast<int>(seeds.next() % 6);
    const int in = 1 + static_cast<int>(seeds.next() % 24);
    const int out = 1 + static_cast<int>(seeds.next() % 24);
    Tensor x = random_tensor({rows, in}, seeds.next(), 2.f);
    Tensor W = random_tensor({out, in}, seeds.next(), 2.f);
    Tensor b = random_tensor({out}, seeds.next(), 2.f);
    Tensor y = nn::linear(x, W, b);
    const auto want = linear_oracle(x, W, b);
    for (int64_t i = 0; i < y.numel(); i++)
      CHECK(std::abs(y[i] - want[i]) <= 1e-5 * std::max(1.0, std::abs(want[i])));
  }
}
