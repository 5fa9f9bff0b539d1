// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Waveform <-> STFT conversion, input normalization, triangular Mel
// filterbanks, Mel power spectra, the rectified power-ratio mask and its
// application, and a pseudo-inverse waveform fallback.
//
// STFT convention: periodic Hann window, mirror padding of fft_size/2
// samples at the start only (no future samples, so the streaming path can
// reproduce frames bit-exactly), frame count
// T = floor((n + fft_size/2 - fft_size) / hop) + 1.

#pragma once

#include <complex>
#include <vector>

#include "melstream/run_config.hpp"
#include "melstream/tensor.hpp"

namespace melstream::dsp {

inline constexpr float kPowerFloor = 1e-10f;
inline constexpr float kLogFloor = 1e-10f;
inline constexpr float kNormFloor = 1e-10f;

// In-place complex radix-2 FFT, power-of-two sizes.
class Fft {
 public:
  explicit Fft(int n);
  int size() const { return n_; }
  void forward(std::complex<float>* x) const;
  void inverse(std::complex<float>* x) const;  // includes the 1/N factor
 private:
  int n_;
  std::vector<std::complex<float>> twiddle_;
  std::vector<int> rev_;
};

// Complex STFT coefficients laid out [frame][channel][bin].
struct Spectrogram {
  int frames = 0, channels = 0, bins = 0;
  std::vector<std::complex<float>> data;

  Spectrogram() = default;
  Spectrogram(int t, int ch, int f)
      : frames(t), channels(ch), bins(f),
        data(static_cast<size_t>(t) * ch * f) {}
  std::complex<float>* at(int t, int ch) {
    return data.data() + (static_cast<size_t>(t) * channels + ch) * bins;
  }
  const std::complex<float>* at(int t, int ch) const {
    return data.data() + (static_cast<size_t>(t) * channels + ch) * bins;
  }
};

class Stft {
 public:
  explicit Stft(const StftConfig& cfg);
  const StftConfig& config() const { return cfg_; }
  int bins() const { return cfg_.bins(); }
  int pad() const { return cfg_.fft_size / 2; }
  const std::vector<float>& window() const { return window_; }

  // Frames representable for n input samples; throws if n is too short to
  // fill the first window (n < fft_size - pad).
  int num_frames(int64_t n_samples) const;

  // Mirror-padded sample lookup shared by the batch and streaming paths.
  static float sample_at(const float* x, int64_t n, int64_t idx) {
    return idx >= 0 ? (idx < n ? x[idx] : 0.f) : x[-idx - 1];
  }

  // Batch analysis of interleaved multichannel samples.
  Spectrogram forward(const float* interleaved, int64_t n_samples, int channels) const;

  // One windowed frame (fft_size mono samples, window not yet applied).
  void frame_to_spectrum(const float* frame, std::complex<float>* out) const;

  // Overlap-add synthesis of one channel; returns (T-1)*hop + fft_size - pad
  // samples, aligned with the analysis input.
  std::vector<float> inverse(const Spectrogram& spec, int channel = 0) const;

 private:
  StftConfig cfg_;
  std::vector<float> window_;
  Fft fft_;
};

// ---- Mel filterbank ----

double hz_to_mel(double hz);   // HTK: 2595 * log10(1 + hz/700)
double mel_to_hz(double mel);

// F' x F non-negative triangular filters with unit peak, HTK Mel spacing.
// Rows are contiguous triangles; interior FFT bins (strictly between the
// first and last filter centers) sum to 1 across rows.
struct MelFilterbank {
  int n_mels = 0, n_bins = 0;
  std::vector<float> weights;      // dense [n_mels][n_bins]
  std::vector<int> lo, hi;         // support of row m is bins [lo[m], hi[m])
  std::vector<double> edges_hz;    // n_mels + 2 band edges

  float at(int m, int f) const { return weights[static_cast<size_t>(m) * n_bins + f]; }
  int64_t nnz() const;
};

MelFilterbank build_mel_filterbank(const StftConfig& stft, const MelConfig& mel);

// ---- spectra, masks, loss ----

// |X|^2 of one channel through the filterbank: [T, F'] non-negative.
Tensor mel_power(const Spectrogram& spec, const MelFilterbank& fb, int channel,
                 OpCounter* c = nullptr);

// Mel power of a single frame (bins complex values) into out[F'].
void mel_power_frame(const std::complex<float>* frame, const MelFilterbank& fb,
                     float* out, OpCounter* c = nullptr);

// Rectified power-ratio mask min(sqrt(S/X), 1) per bin; X==0 maps to 1 when
// S>0 and to 0 when S==0 (the S/X -> limit convention).
Tensor mel_prm(const Tensor& clean_mel, const Tensor& noisy_mel);

// log(max(mask^2 * noisy_mel, floor)).
Tensor apply_mask_log(const Tensor& noisy_mel, const Tensor& mask);

double mask_mse(const Tensor& pred, const Tensor& target);

// ---- input normalization ----

// Running mean (bias-corrected exponential, `decay` per frame) of the
// reference channel magnitude; every channel is divided by it. Frame t uses
// statistics of frames <= t only.
struct NormState {
  float ema = 0.f;
  int64_t count = 0;
  float decay_pow = 1.f;  // decay^count, for bias correction
};

// Normalizes one frame in place; returns the applied scale.
float normalize_frame(std::complex<float>* frame, int channels, int bins,
                      int ref_channel0, float decay, NormState& state);

void normalize(Spectrogram& spec, int ref_channel0, float decay, NormState& state,
               std::vector<float>* scales = nullptr);

// ---- waveform fallback ----

// Lifts a Mel mask to linear frequency through the column-normalized
// filterbank transpose (clamped to [0,1]), scales the reference-channel
// STFT and resynthesizes. A low-fidelity stand-in for a vocoder.
std::vector<float> pseudo_inverse_reconstruct(const Spectrogram& noisy,
                                              const Tensor& mel_mask,
                                              const MelFilterbank& fb,
                                              const Stft& stft, int ref_channel0);

// Mask lift used above, exposed for tests: [T, F] in [0,1].
Tensor lift_mel_mask(const Tensor& mel_mask, const MelFilterbank& fb);

}  // namespace melstream::dsp
