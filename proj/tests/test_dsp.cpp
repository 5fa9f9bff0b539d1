// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "melstream/dsp.hpp"
#include "melstream/rng.hpp"

using namespace melstream;
using dsp::MelFilterbank;
using dsp::Spectrogram;
using dsp::Stft;

namespace {

std::vector<float> sine_wave(int n, int channels, double freq_hz, double fs,
                             float amp = 1.f) {
  std::vector<float> x(static_cast<size_t>(n) * channels);
  for (int i = 0; i < n; i++) {
    const float v = amp * static_cast<float>(std::sin(2.0 * M_PI * freq_hz * i / fs));
    for (int ch = 0; ch < channels; ch++) x[static_cast<size_t>(i) * channels + ch] = v;
  }
  return x;
}

std::vector<float> random_wave(int n, int channels, uint64_t seed, float amp = 0.5f) {
  std::vector<float> x(static_cast<size_t>(n) * channels);
  SplitMix64 rng(seed);
  for (auto& v : x) v = rng.next_uniform(amp);
  return x;
}

StftConfig default_stft() { return StftConfig{}; }

}  // namespace

TEST_CASE("stft: pure sine at a bin center peaks at that bin") {
  const StftConfig cfg = default_stft();
  Stft stft(cfg);
  const int k = 32;
  const double freq = k * 16000.0 / 512.0;
  auto x = sine_wave(16000, 1, freq, 16000.0);
  Spectrogram spec = stft.forward(x.data(), 16000, 1);
  for (int t = 20; t < spec.frames - 20; t += 13) {
    const std::complex<float>* f = spec.at(t, 0);
    int argmax = 0;
    float best = 0.f;
    for (int i = 0; i < spec.bins; i++)
      if (std::abs(f[i]) > best) {
        best = std::abs(f[i]);
        argmax = i;
      }
    CHECK(argmax == k);
  }
}

TEST_CASE("stft: zero input gives an all-zero spectrogram, empty input throws") {
  Stft stft(default_stft());
  std::vector<float> x(4000, 0.f);
  Spectrogram spec = stft.forward(x.data(), 4000, 1);
  for (const auto& v : spec.data) CHECK(std::abs(v) == 0.f);
  CHECK_THROWS(stft.forward(x.data(), 0, 1));
  CHECK_THROWS(stft.forward(x.data(), 100, 1));  // below one window
}

TEST_CASE("stft/istft round trip is close on interior samples") {
  Stft stft(default_stft());
  auto x = random_wave(8192, 1, 42, 1.f);
  Spectrogram spec = stft.forward(x.data(), 8192, 1);
  std::vector<float> y = stft.inverse(spec, 0);
  REQUIRE(static_cast<int>(y.size()) >= 7000);
  for (int i = 600; i < 7000; i++)
    CHECK(std::abs(y[i] - x[i]) <= 1e-4);
}

TEST_CASE("istft: zero spectrogram gives silence") {
  Stft stft(default_stft());
  Spectrogram spec(10, 1, stft.bins());
  for (float v : stft.inverse(spec, 0)) CHECK(v == 0.f);
}

TEST_CASE("stft frame count formula") {
  Stft stft(default_stft());
  // T = floor((n + 256 - 512)/128) + 1
  CHECK(stft.num_frames(256) == 1);
  CHECK(stft.num_frames(384) == 2);
  CHECK(stft.num_frames(16000) == 124);
}

TEST_CASE("normalize: constant-magnitude input is scaled to unit magnitude") {
  Stft stft(default_stft());
  auto x = sine_wave(8000, 2, 1000.0, 16000.0, 0.25f);
  Spectrogram spec = stft.forward(x.data(), 8000, 2);
  // per-frame mean reference magnitude after normalization
  dsp::NormState st;
  dsp::normalize(spec, 1, 0.999f, st);
  for (int t = 5; t < spec.frames; t++) {
    float mag = 0.f;
    const std::complex<float>* f = spec.at(t, 1);
    for (int i = 0; i < spec.bins; i++) mag += std::abs(f[i]);
    mag /= spec.bins;
    CHECK(mag == doctest::Approx(1.f).epsilon(0.05));
  }
}

TEST_CASE("normalize: global scaling leaves normalized output unchanged") {
  Stft stft(default_stft());
  auto x = random_wave(6000, 3, 7");
  auto x10 = x;
  for (auto& v : x10) v *= 10.f;
  Spectrogram a = stft.forward(x.data(), 6000, 3);
  Spectrogram b = stft.forward(x10.data(), 6000, 3);
  dsp::NormState sa, sb;
  dsp::normalize(a, 2, 0.999f, sa);
  dsp::normalize(b, 2, 0.999f, sb);
  for (int t = 3; t < a.frames; t++)
    for (int ch = 0; ch < 3; ch++) {
      const auto* fa = a.at(t, ch);
      const auto* fb = b.at(t, ch);
      for (int i = 0; i < a.bins; i++)
        CHECK(std::abs(fa[i] - fb[i]) <= 1e-5f * (1.f + std::abs(fa[i])));
    }
}

TEST_CASE("normalize: zero spectrogram stays zero without NaN") {
  Spectrogram spec(8, 2, 257);
  dsp::NormState st;
  dsp::normalize(spec, 0, 0.999f, st);
  for (const auto& v : spec.data) {
    CHECK(std::isfinite(v.real()));
    CHECK(v == std::complex<float>(0.f, 0.f));
  }
}

TEST_CASE("normalize: streaming-causal, prefix is bit-exact") {
  Stft stft(default_stft());
  auto x = random_wave(6000, 2, 9);
  Spectrogram full = stft.forward(x.data(), 6000, 2);
  Spectrogram prefix(20, 2, full.bins);
  for (int t = 0; t < 20; t++)
    for (int ch = 0; ch < 2; ch++)
      std::copy(full.at(t, ch), full.at(t, ch) + full.bins, prefix.at(t, ch));
  dsp::NormState s1, s2;
  dsp::normalize(full, 1, 0.999f, s1);
  dsp::normalize(prefix, 1, 0.999f, s2);
  for (int t = 0; t < 20; t++)
    for (int ch = 0; ch < 2; ch++)
      for (int i = 0; i < full.bins; i++)
        CHECK(full.at(t, ch)[i] == prefix.at(t, ch)[i]);
}

TEST_CASE("mel scale formula") {
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(781.1753).epsilon(1e-4));
  CHECK(dsp::mel_to_hz(dsp::hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));
}

TEST_CASE("filterbank: structure invariants") {
  const StftConfig stft = default_stft();
  const MelConfig mel;
  MelFilterbank fb = dsp::build_mel_filterbank(stft, mel);
  REQUIRE(fb.n_mels == 80);
  REQUIRE(fb.n_bins == 257);

  // non-negative, unimodal triangular rows, zero outside the support
  for (int m = 0; m < fb.n_mels; m++) {
    bool rising = true;
    float prev = 0.f;
    for (int f = 0; f < fb.n_bins; f++) {
      const float w = fb.at(m, f);
      CHECK(w >= 0.f);
      if (f < fb.lo[m] || f >= fb.hi[m]) CHECK(w == 0.f);
    }
    for (int f = fb.lo[m]; f < fb.hi[m]; f++) {
      const float w = fb.at(m, f);
      if (rising && w < prev) rising = false;
      if (!rising) CHECK(w <= prev + 1e-6f);
      prev = w;
    }
  }

  // band edges touch fmin and fmax
  CHECK(fb.edges_hz.front() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fb.edges_hz.back() == doctest::Approx(8000.0).epsilon(1e-9));

  // partition of unity strictly between the first and last filter centers
  const double bin_hz = 16000.0 / 512.0;
  const double c0 = fb.edges_hz[1], cl = fb.edges_hz[fb.n_mels];
  int interior = 0;
  for (int f = 0; f < fb.n_bins; f++) {
    const double hz = f * bin_hz;
    if (hz <= c0 || hz >= cl) continue;
    double s = 0;
    for (int m = 0; m < fb.n_mels; m++) s += fb.at(m, f);
    CHECK(std::abs(s - 1.0) <= 1e-6);
    interior++;
  }
  CHECK(interior > 200);

  // column sums never exceed 1 (+eps)
  for (int f = 0; f < fb.n_bins; f++) {
    double s = 0;
    for (int m = 0; m < fb.n_mels; m++) s += fb.at(m, f);
    CHECK(s <= 1.0 + 1e-6);
  }
}

TEST_CASE("filterbank: too many bands for the FFT resolution is an error") {
  MelConfig mel;
  mel.n_mels = 400;
  CHECK_THROWS_AS(dsp::build_mel_filterbank(default_stft(), mel), ConfigError);
}

TEST_CASE("mel_power: zero, single-bin linearity and matmul oracle") {
  const MelFilterbank fb = dsp::build_mel_filterbank(default_stft(), MelConfig{});
  Spectrogram zero(3, 1, 257);
  Tensor zp = dsp::mel_power(zero, fb, 0);
  for (int64_t i = 0; i < zp.numel(); i++) CHECK(zp[i] == 0.f);

  // single nonzero bin: band m sees fb[m,f0] * p
  Spectrogram one(1, 1, 257);
  const int f0 = 100;
  one.at(0, 0)[f0] = {2.f, 0.f};  // power 4
  Tensor op = dsp::mel_power(one, fb, 0);
  for (int m = 0; m < fb.n_mels; m++)
    CHECK(op.at2(0, m) == doctest::Approx(fb.at(m, f0) * 4.f).epsilon(1e-6));

  // random spectrogram against a dense double loop
  Spectrogram spec(4, 2, 257);
  SplitMix64 rng(77);
  for (auto& v : spec.data) v = {rng.next_uniform(1.f), rng.next_uniform(1.f)};
  Tensor p = dsp::mel_power(spec, fb, 1);
  for (int t = 0; t < 4; t++)
    for (int m = 0; m < fb.n_mels; m++) {
      double s = 0;
      for (int f = 0; f < 257; f++)
        s += static_cast<double>(fb.at(m, f)) * std::norm(spec.at(t, 1)[f]);
      CHECK(std::abs(p.at2(t, m) - s) <= 1e-5 * std::max(1.0, s));
      CHECK(p.at2(t, m) >= 0.f);
    }
}

TEST_CASE("mel_prm: rectification and limit conventions") {
  Tensor s = Tensor::from_data({1, 5}, {4.f, 0.f, 1.f, 16.f, 3.f});
  Tensor x = Tensor::from_data({1, 5}, {4.f, 2.f, 4.f, 4.f, 0.f});
  Tensor m = dsp::mel_prm(s, x);
  CHECK(m[0] == 1.f);                         // S == X
  CHECK(m[1] == 0.f);                         // S == 0
  CHECK(m[2] == doctest::Approx(0.5f));       // S/X = 0.25
  CHECK(m[3] == 1.f);                         // S/X = 4, rectified
  CHECK(m[4] == 1.f);                         // X == 0, S > 0
  Tensor z = Tensor::from_data({1, 1}, {0.f});
  CHECK(dsp::mel_prm(z, z)[0] == 0.f);        // X == 0, S == 0
  CHECK_THROWS_AS(dsp::mel_prm(s, Tensor({1, 4})), ShapeError);
}

TEST_CASE("mel_prm: output is always within [0,1] on random spectra") {
  SplitMix64 rng(88);
  for (int rep = 0; rep < 200; rep++) {
    Tensor s({4, 16}), x({4, 16});
    for (int64_t i = 0; i < s.numel(); i++) {
      s[i] = rng.next_float() * 10.f;
      x[i] = rng.next_float() * 10.f;
    }
    Tensor m = dsp::mel_prm(s, x);
    for (int64_t i = 0; i < m.numel(); i++) {
      CHECK(m[i] >= 0.f);
      CHECK(m[i] <= 1.f);
    }
  }
}

TEST_CASE("apply_mask_log: identity, floor, and inverse check") {
  Tensor x = Tensor::from_data({1, 3}, {2.f, 0.5f, 1e-13f});
  Tensor ones = Tensor::from_data({1, 3}, {1.f, 1.f, 1.f});
  Tensor zeros = Tensor::from_data({1, 3}, {0.f, 0.f, 0.f});
  Tensor a = dsp::apply_mask_log(x, ones);
  CHECK(a[0] == doctest::Approx(std::log(2.f)));
  CHECK(a[2] == doctest::Approx(std::log(dsp::kLogFloor)));
  Tensor b = dsp::apply_mask_log(x, zeros);
  for (int i = 0; i < 3; i++) CHECK(b[i] == doctest::Approx(std::log(dsp::kLogFloor)));

  SplitMix64 rng(99);
  Tensor xr({2, 40}), mr({2, 40});
  for (int64_t i = 0; i < xr.numel(); i++) {
    xr[i] = rng.next_float() * 3.f + 0.1f;
    mr[i] = rng.next_float() * 0.9f + 0.1f;
  }
  Tensor out = dsp::apply_mask_log(xr, mr);
  for (int64_t i = 0; i < out.numel(); i++) {
    const double want = static_cast<double>(mr[i]) * mr[i] * xr[i];
    if (want > dsp::kLogFloor * 10)
      CHECK(std::exp(static_cast<double>(out[i])) ==
            doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("apply_mask of the oracle mask reproduces the clean power") {
  // with clean <= noisy per bin the mask is never rectified
  SplitMix64 rng(111);
  Tensor noisy({3, 30}), clean({3, 30});
  for (int64_t i = 0; i < noisy.numel(); i++) {
    noisy[i] = rng.next_float() * 5.f + 0.5f;
    clean[i] = noisy[i] * rng.next_float();
  }
  Tensor mask = dsp::mel_prm(clean, noisy);
  Tensor logmel = dsp::apply_mask_log(noisy, mask);
  for (int64_t i = 0; i < logmel.numel(); i++) {
    const double want = std::log(std::max(clean[i], dsp::kLogFloor));
    CHECK(std::abs(logmel[i] - want) <= 1e-5 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("mask_mse: trivial values and loop oracle") {
  Tensor a = Tensor::from_data({2, 2}, {0.2f, 0.4f, 0.6f, 0.8f});
  CHECK(dsp::mask_mse(a, a) == 0.0);
  Tensor ones = Tensor::from_data({2, 2}, {1.f, 1.f, 1.f, 1.f});
  Tensor zeros = Tensor::from_data({2, 2}, {0.f, 0.f, 0.f, 0.f});
  CHECK(dsp::mask_mse(ones, zeros) == doctest::Approx(1.0));

  SplitMix64 rng(123);
  Tensor p({5, 7}), t({5, 7});
  for (int64_t i = 0; i < p.numel(); i++) {
    p[i] = rng.next_float();
    t[i] = rng.next_float();
  }
  double want = 0;
  for (int64_t i = 0; i < p.numel(); i++)
    want += (static_cast<double>(p[i]) - t[i]) * (static_cast<double>(p[i]) - t[i]);
  want /= static_cast<double>(p.numel());
  CHECK(dsp::mask_mse(p, t) == doctest::Approx(want).epsilon(1e-7));
}

TEST_CASE("pseudo-inverse reconstruction: identity lift and silence") {
  const StftConfig cfg = default_stft();
  Stft stft(cfg);
  const MelFilterbank fb = dsp::build_mel_filterbank(cfg, MelConfig{});
  // band-limited test signal away from the DC/Nyquist edge bins
  auto x = sine_wave(8000, 1, 32 * 16000.0 / 512.0, 16000.0, 0.5f);
  for (size_t i = 0; i < x.size(); i++)
    x[i] += 0.3f * static_cast<float>(std::sin(2.0 * M_PI * 90 * 16000.0 / 512.0 * i / 16000.0));
  Spectrogram spec = stft.forward(x.data(), 8000, 1);

  Tensor ones({spec.frames, fb.n_mels});
  for (int64_t i = 0; i < ones.numel(); i++) ones[i] = 1.f;
  std::vector<float> y = dsp::pseudo_inverse_reconstruct(spec, ones, fb, stft, 0);
  std::vector<float> direct = stft.inverse(spec, 0);
  REQUIRE(y.size() == direct.size());
  for (size_t i = 600; i + 600 < y.size(); i++)
    CHECK(std::abs(y[i] - direct[i]) <= 2e-3);

  Tensor zeros({spec.frames, fb.n_mels});
  std::vector<float> s = dsp::pseudo_inverse_reconstruct(spec, zeros, fb, stft, 0);
  double ein = 0, eout = 0;
  for (float v : x) ein += static_cast<double>(v) * v;
  for (float v : s) eout += static_cast<double>(v) * v;
  CHECK(eout <= 1e-6 * ein);
}

TEST_CASE("lifted mask stays within [0,1] for random masks") {
  const MelFilterbank fb = dsp::build_mel_filterbank(default_stft(), MelConfig{});
  SplitMix64 rng(321);
  Tensor m({6, fb.n_mels});
  for (int64_t i = 0; i < m.numel(); i++) m[i] = rng.next_float();
  Tensor lin = dsp::lift_mel_mask(m, fb);
  for (int64_t i = 0; i < lin.numel(); i++) {
    CHECK(lin[i] >= 0.f);
    CHECK(lin[i] <= 1.f);
  }
}
