// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace melstream::dsp {

// ---- FFT ----

Fft::Fft(int n) : n_(n) {
  if (n < 2 || (n & (n - 1)) != 0) throw ConfigError("fft size must be a power of two");
  twiddle_.resize(n / 2);
  for (int k = 0; k < n / 2; k++) {
    const double a = -2.0 * M_PI * k / n;
    twiddle_[k] = {static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a))};
  }
  rev_.resize(n);
  int bits = 0;
  while ((1 << bits) < n) bits++;
  for (int i = 0; i < n; i++) {
    int r = 0;
    for (int b = 0; b < bits; b++) r |= ((i >> b) & 1) << (bits - 1 - b);
    rev_[i] = r;
  }
}

void Fft::forward(std::complex<float>* x) const {
  const int n = n_;
  for (int i = 0; i < n; i++)
    if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len >> 1;
    const int step = n / len;
    for (int base = 0; base < n; base += len) {
      for (int j = 0; j < half; j++) {
        const std::complex<float> w = twiddle_[static_cast<size_t>(j) * step];
        const std::complex<float> u = x[base + j];
        const std::complex<float> t = w * x[base + j + half];
        x[base + j] = u + t;
        x[base + j + half] = u - t;
      }
    }
  }
}

void Fft::inverse(std::complex<float>* x) const {
  for (int i = 0; i < n_; i++) x[i] = std::conj(x[i]);
  forward(x);
  const float inv = 1.f / static_cast<float>(n_);
  for (int i = 0; i < n_; i++) x[i] = std::conj(x[i]) * inv;
}

// ---- STFT ----

Stft::Stft(const StftConfig& cfg) : cfg_(cfg), fft_(cfg.fft_size) {
  window_.resize(cfg.fft_size);
  for (int i = 0; i < cfg.fft_size; i++)
    window_[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.fft_size));
}

int Stft::num_frames(int64_t n_samples) const {
  const int64_t padded = n_samples + pad();
  if (padded < cfg_.fft_size)
    throw Error("input too short: need at least " +
                std::to_string(cfg_.fft_size - pad()) + " samples, got " +
                std::to_string(n_samples));
  return static_cast<int>((padded - cfg_.fft_size) / cfg_.hop) + 1;
}

void Stft::frame_to_spectrum(const float* frame, std::complex<float>* out) const {
  const int n = cfg_.fft_size;
  std::vector<std::complex<float>> buf(n);
  for (int i = 0; i < n; i++) buf[i] = frame[i] * window_[i];
  fft_.forward(buf.data());
  std::copy(buf.begin(), buf.begin() + bins(), out);
}

Spectrogram Stft::forward(const float* interleaved, int64_t n_samples, int channels) const {
  if (n_samples <= 0) throw Error("empty input");
  if (channels < 1) throw Error("need at least one channel");
  const int T = num_frames(n_samples);
  Spectrogram spec(T, channels, bins());
  std::vector<float> mono(n_samples);
  std::vector<float> frame(cfg_.fft_size);
  for (int ch = 0; ch < channels; ch++) {
    for (int64_t i = 0; i < n_samples; i++) mono[i] = interleaved[i * channels + ch];
    for (int t = 0; t < T; t++) {
      const int64_t start = static_cast<int64_t>(t) * cfg_.hop - pad();
      for (int j = 0; j < cfg_.fft_size; j++)
        frame[j] = sample_at(mono.data(), n_samples, start + j);
      frame_to_spectrum(frame.data(), spec.at(t, ch));
    }
  }
  return spec;
}

std::vector<float> Stft::inverse(const Spectrogram& spec, int channel) const {
  if (spec.bins != bins()) throw ShapeError("spectrogram bin count does not match config");
  if (channel < 0 || channel >= spec.channels) throw ShapeError("channel out of range");
  const int n = cfg_.fft_size;
  const int T = spec.frames;
  const int64_t padded_len = static_cast<int64_t>(T - 1) * cfg_.hop + n;
  std::vector<float> acc(padded_len, 0.f);
  std::vector<float> wsum(padded_len, 0.f);
  std::vector<std::complex<float>> buf(n);
  for (int t = 0; t < T; t++) {
    const std::complex<float>* f = spec.at(t, channel);
    // rebuild the full conjugate-symmetric spectrum
    for (int k = 0; k < bins(); k++) buf[k] = f[k];
    for (int k = bins(); k < n; k++) buf[k] = std::conj(f[n - k]);
    fft_.inverse(buf.data());
    const int64_t base = static_cast<int64_t>(t) * cfg_.hop;
    for (int j = 0; j < n; j++) {
      acc[base + j] += buf[j].real() * window_[j];
      wsum[base + j] += window_[j] * window_[j];
    }
  }
  const int64_t out_len = padded_len - pad();
  std::vector<float> out(out_len);
  for (int64_t i = 0; i < out_len; i++) {
    const float d = wsum[i + pad()];
    out[i] = d > 1e-8f ? acc[i + pad()] / d : 0.f;
  }
  return out;
}

// ---- Mel filterbank ----

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int64_t MelFilterbank::nnz() const {
  int64_t n = 0;
  for (int m = 0; m < n_mels; m++) n += hi[m] - lo[m];
  return n;
}

MelFilterbank build_mel_filterbank(const StftConfig& stft, const MelConfig& mel) {
  const int F = stft.bins();
  const int Fp = mel.n_mels;
  if (Fp < 2) throw ConfigError("n_mels must be >= 2");
  if (mel.fmax > stft.sample_rate / 2.0 + 1e-6)
    throw ConfigError("fmax exceeds Nyquist");

  MelFilterbank fb;
  fb.n_mels = Fp;
  fb.n_bins = F;
  fb.weights.assign(static_cast<size_t>(Fp) * F, 0.f);
  fb.lo.assign(Fp, 0);
  fb.hi.assign(Fp, 0);
  fb.edges_hz.resize(Fp + 2);

  const double mel_lo = hz_to_mel(mel.fmin);
  const double mel_hi = hz_to_mel(mel.fmax);
  for (int e = 0; e < Fp + 2; e++)
    fb.edges_hz[e] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * e / (Fp + 1));

  const double bin_hz = static_cast<double>(stft.sample_rate) / stft.fft_size;
  for (int m = 0; m < Fp; m++) {
    const double lo_hz = fb.edges_hz[m];
    const double c_hz = fb.edges_hz[m + 1];
    const double hi_hz = fb.edges_hz[m + 2];
    int first = -1, last = -1;
    for (int f = 0; f < F; f++) {
      const double hz = f * bin_hz;
      double w = 0.0;
      if (hz > lo_hz && hz < c_hz) w = (hz - lo_hz) / (c_hz - lo_hz);
      else if (hz >= c_hz && hz < hi_hz) w = (hi_hz - hz) / (hi_hz - c_hz);
      if (w > 0.0) {
        fb.weights[static_cast<size_t>(m) * F + f] = static_cast<float>(w);
        if (first < 0) first = f;
        last = f;
      }
    }
    if (first < 0)
      throw ConfigError("mel filter " + std::to_string(m) +
                        " has no FFT bin under its triangle; reduce n_mels");
    fb.lo[m] = first;
    fb.hi[m] = last + 1;
  }
  return fb;
}

// ---- spectra and masks ----

void mel_power_frame(const std::complex<float>* frame, const MelFilterbank& fb,
                     float* out, OpCounter* c) {
  for (int m = 0; m < fb.n_mels; m++) {
    float s = 0.f;
    const float* w = fb.weights.data() + static_cast<size_t>(m) * fb.n_bins;
    for (int f = fb.lo[m]; f < fb.hi[m]; f++) s += w[f] * std::norm(frame[f]);
    out[m] = s;
  }
  if (c) {
    c->macs += static_cast<uint64_t>(fb.nnz());
    c->adds += static_cast<uint64_t>(2) * fb.n_bins;  // |.|^2 per bin
  }
}

Tensor mel_power(const Spectrogram& spec, const MelFilterbank& fb, int channel,
                 OpCounter* c) {
  if (channel < 0 || channel >= spec.channels) throw ShapeError("channel out of range");
  if (spec.bins != fb.n_bins) throw ShapeError("filterbank bin count mismatch");
  Tensor out({spec.frames, fb.n_mels});
  for (int t = 0; t < spec.frames; t++)
    mel_power_frame(spec.at(t, channel), fb, out.data() + static_cast<size_t>(t) * fb.n_mels, c);
  return out;
}

Tensor mel_prm(const Tensor& clean_mel, const Tensor& noisy_mel) {
  if (!clean_mel.same_shape(noisy_mel))
    throw ShapeError("mel_prm shape mismatch: " + clean_mel.shape_str() + " vs " +
                     noisy_mel.shape_str());
  Tensor mask(clean_mel.dims());
  for (int64_t i = 0; i < mask.numel(); i++) {
    const float s = clean_mel[i];
    const float x = noisy_mel[i];
    float v;
    if (x <= 0.f)
      v = s > 0.f ? 1.f : 0.f;
    else
      v = std::min(std::sqrt(s / x), 1.f);
    mask[i] = v;
  }
  return mask;
}

Tensor apply_mask_log(const Tensor& noisy_mel, const Tensor& mask) {
  if (!noisy_mel.same_shape(mask)) throw ShapeError("apply_mask shape mismatch");
  Tensor out(noisy_mel.dims());
  for (int64_t i = 0; i < out.numel(); i++)
    out[i] = std::log(std::max(mask[i] * mask[i] * noisy_mel[i], kLogFloor));
  return out;
}

double mask_mse(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ShapeError("mask_mse shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < pred.numel(); i++) {
    const double d = static_cast<double>(pred[i]) - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.numel());
}

// ---- normalization ----

float normalize_frame(std::complex<float>* frame, int channels, int bins,
                      int ref_channel0, float decay, NormState& state) {
  const std::complex<float>* ref = frame + static_cast<size_t>(ref_channel0) * bins;
  float mag = 0.f;
  for (int f = 0; f < bins; f++) mag += std::abs(ref[f]);
  mag /= static_cast<float>(bins);
  state.ema = decay * state.ema + (1.f - decay) * mag;
  state.count++;
  state.decay_pow *= decay;
  const float corrected = state.ema / (1.f - state.decay_pow);
  const float scale = 1.f / std::max(corrected, kNormFloor);
  for (int i = 0; i < channels * bins; i++) frame[i] *= scale;
  return scale;
}

void normalize(Spectrogram& spec, int ref_channel0, float decay, NormState& state,
               std::vector<float>* scales) {
  if (ref_channel0 < 0 || ref_channel0 >= spec.channels)
    throw ShapeError("reference channel out of range");
  if (scales) scales->resize(spec.frames);
  for (int t = 0; t < spec.frames; t++) {
    const float s = normalize_frame(spec.at(t, 0), spec.channels, spec.bins,
                                    ref_channel0, decay, state);
    if (scales) (*scales)[t] = s;
  }
}

// ---- pseudo-inverse waveform fallback ----

Tensor lift_mel_mask(const Tensor& mel_mask, const MelFilterbank& fb) {
  if (mel_mask.rank() != 2 || mel_mask.dim(1) != fb.n_mels)
    throw ShapeError("mel mask must be [T, n_mels]");
  const int T = static_cast<int>(mel_mask.dim(0));
  const int F = fb.n_bins;
  std::vector<float> denom(F, 0.f);
  for (int m = 0; m < fb.n_mels; m++)
    for (int f = fb.lo[m]; f < fb.hi[m]; f++) denom[f] += fb.at(m, f);
  Tensor lin({T, F});
  for (int t = 0; t < T; t++) {
    for (int m = 0; m < fb.n_mels; m++) {
      const float v = mel_mask.at2(t, m);
      for (int f = fb.lo[m]; f < fb.hi[m]; f++) lin.at2(t, f) += fb.at(m, f) * v;
    }
    for (int f = 0; f < F; f++)
      lin.at2(t, f) = std::clamp(lin.at2(t, f) / std::max(denom[f], 1e-6f), 0.f, 1.f);
  }
  return lin;
}

std::vector<float> pseudo_inverse_reconstruct(const Spectrogram& noisy,
                                              const Tensor& mel_mask,
                                              const MelFilterbank& fb,
                                              const Stft& stft, int ref_channel0) {
  if (mel_mask.dim(0) != noisy.frames) throw ShapeError("mask frame count mismatch");
  Tensor lin = lift_mel_mask(mel_mask, fb);
  Spectrogram masked(noisy.frames, 1, noisy.bins);
  for (int t = 0; t < noisy.frames; t++) {
    const std::complex<float>* src = noisy.at(t, ref_channel0);
    std::complex<float>* dst = masked.at(t, 0);
    for (int f = 0; f < noisy.bins; f++) dst[f] = src[f] * lin.at2(t, f);
  }
  return stft.inverse(masked, 0);
}

}  // namespace melstream::dsp
