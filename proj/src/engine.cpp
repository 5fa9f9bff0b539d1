// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

namespace melstream {

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

const PipelineConfig& checked(const PipelineConfig& cfg, const TensorMap& weights) {
  cfg.validate();
  const ValidateResult v = validate_weights(weights, cfg);
  if (!v.ok()) throw ValidationError("weights do not match config:\n" + v.summary());
  return cfg;
}

}  // namespace

Engine::Engine(const PipelineConfig& cfg, const TensorMap& weights)
    : cfg_(checked(cfg, weights)),
      stft_(cfg_.stft),
      fb_(dsp::build_mel_filterbank(cfg_.stft, cfg_.mel)),
      bb_(cfg_, weights) {
  if (cfg_.scale == Scale::mel) s2m_.emplace(cfg_, fb_, weights);
}

// ---- Stream ----

Engine::Stream::Stream(const Engine* e) : eng_(e) {
  const PipelineConfig& cfg = e->cfg_;
  ring_.assign(static_cast<size_t>(cfg.channels) * cfg.stft.fft_size, 0.f);
  window_.assign(cfg.stft.fft_size, 0.f);
  spec_.assign(static_cast<size_t>(cfg.channels) * cfg.stft.bins(), {0.f, 0.f});
  power_raw_.resize(round_up16(e->bands()));
  supp_.resize(round_up16(e->bands()));
  if (e->s2m_) {
    s2m_scratch_ = e->s2m_->make_scratch();
    tsb_ = e->s2m_->make_tsb_state();
    feat_.resize(e->bands(), cfg.s2m.embed_dim);
  } else {
    feat_.resize(e->bands(), 2 * cfg.channels);
  }
  bb_scratch_ = e->bb_.make_scratch();
  bb_state_ = e->bb_.make_state();
}

void Engine::Stream::reset() {
  std::fill(ring_.begin(), ring_.end(), 0.f);
  std::fill(spec_.begin(), spec_.end(), std::complex<float>{0.f, 0.f});
  samples_seen_ = 0;
  frames_ = 0;
  norm_ = dsp::NormState{};
  power_raw_.zero();
  supp_.zero();
  feat_.zero();
  tsb_.reset();
  bb_state_.reset();
  net_.reset();
  stages_ = StageSeconds{};
}

float Engine::Stream::ring_at(int ch, int64_t idx) const {
  const int fft = eng_->cfg_.stft.fft_size;
  return ring_[static_cast<size_t>(ch) * fft + static_cast<size_t>(idx % fft)];
}

bool Engine::Stream::push(const float* block, float* logmel, float* mask) {
  const PipelineConfig& cfg = eng_->cfg_;
  const int hop = cfg.stft.hop;
  const int M = cfg.channels;
  const int fft = cfg.stft.fft_size;
  for (int i = 0; i < hop; i++) {
    const size_t slot = static_cast<size_t>((samples_seen_ + i) % fft);
    for (int ch = 0; ch < M; ch++)
      ring_[static_cast<size_t>(ch) * fft + slot] = block[static_cast<size_t>(i) * M + ch];
  }
  samples_seen_ += hop;

  // frame t covers padded positions [t*hop, t*hop + fft), i.e. raw samples
  // through t*hop + fft - pad - 1
  const int64_t needed = frames_ * hop + (fft - eng_->stft_.pad());
  if (samples_seen_ < needed) return false;
  compute_frame(frames_, logmel, mask);
  frames_++;
  return true;
}

void Engine::Stream::compute_frame(int64_t t, float* logmel, float* mask) {
  const PipelineConfig& cfg = eng_->cfg_;
  const dsp::Stft& stft = eng_->stft_;
  const int fft = cfg.stft.fft_size;
  const int F = cfg.stft.bins();
  const int M = cfg.channels;
  const int bands = eng_->bands();
  const int ref = cfg.ref_channel0();

  double t0 = timing_ ? now_s() : 0.0;

  for (int ch = 0; ch < M; ch++) {
    for (int j = 0; j < fft; j++) {
      const int64_t idx = t * cfg.stft.hop - stft.pad() + j;
      window_[j] = idx >= 0 ? ring_at(ch, idx) : ring_at(ch, -idx - 1);
    }
    stft.frame_to_spectrum(window_.data(), spec_.data() + static_cast<size_t>(ch) * F);
  }

  // reference power in the original scale, before normalization
  if (eng_->s2m_) {
    dsp::mel_power_frame(spec_.data() + static_cast<size_t>(ref) * F, eng_->fb_,
                         power_raw_.data(), nullptr);
  } else {
    const std::complex<float>* r = spec_.data() + static_cast<size_t>(ref) * F;
    for (int f = 0; f < F; f++) power_raw_[f] = std::norm(r[f]);
  }

  dsp::normalize_frame(spec_.data(), M, F, ref, cfg.norm_decay, norm_);

  // supplementary feature: log power of the normalized reference channel
  if (eng_->s2m_) {
    dsp::mel_power_frame(spec_.data() + static_cast<size_t>(ref) * F, eng_->fb_,
                         supp_.data(), nullptr);
  } else {
    const std::complex<float>* r = spec_.data() + static_cast<size_t>(ref) * F;
    for (int f = 0; f < F; f++) supp_[f] = std::norm(r[f]);
  }
  for (int b = 0; b < bands; b++)
    supp_[b] = std::log(supp_[b] + dsp::kLogFloor);

  if (timing_) {
    const double t1 = now_s();
    stages_.frontend += t1 - t0;
    t0 = t1;
  }

  if (eng_->s2m_) {
    eng_->s2m_->frame(spec_.data(), tsb_, feat_, s2m_scratch_, &net_);
  } else {
    for (int f = 0; f < F; f++) {
      float* row = feat_.row(f);
      for (int ch = 0; ch < M; ch++) {
        const std::complex<float> v = spec_[static_cast<size_t>(ch) * F + f];
        row[2 * ch] = v.real();
        row[2 * ch + 1] = v.imag();
      }
    }
  }

  if (timing_) {
    const double t1 = now_s();
    stages_.compress += t1 - t0;
    t0 = t1;
  }

  eng_->bb_.frame(feat_, supp_.data(), bb_state_, mask, bb_scratch_, &net_);

  for (int b = 0; b < bands; b++)
    logmel[b] = std::log(std::max(mask[b] * mask[b] * power_raw_[b], dsp::kLogFloor));

  if (timing_) stages_.backbone += now_s() - t0;
}

size_t Engine::Stream::state_bytes() const {
  size_t n = ring_.capacity() * sizeof(float) + window_.capacity() * sizeof(float) +
             spec_.capacity() * sizeof(std::complex<float>);
  n += power_raw_.size() * sizeof(float) + supp_.size() * sizeof(float);
  n += feat_.footprint_bytes();
  n += tsb_.footprint_bytes() + bb_state_.footprint_bytes();
  const S2mScratch& s = s2m_scratch_;
  for (const PackedMat* m :
       {&s.feat_a, &s.feat_b, &s.emb_a, &s.emb_b, &s.pad_a, &s.conv_out, &s.comm_src,
        &s.comm_gate, &s.post_a, &s.post_b, &s.stacked})
    n += m->footprint_bytes();
  const BackboneScratch& b = bb_scratch_;
  for (const PackedMat* m : {&b.gates_a, &b.gates_b, &b.seq_out, &b.out_a, &b.out_b,
                             &b.assemble, &b.mask_col})
    n += m->footprint_bytes();
  n += (b.h_f.size() + b.c_f.size() + b.h_r.size() + b.c_r.size() + b.mask.size()) *
       sizeof(float);
  return n;
}

// ---- offline ----

Engine::Result Engine::offline(const float* interleaved, int64_t n_samples,
                               int channels, bool want_wave, OpCounter* net) const {
  if (channels != cfg_.channels)
    throw ValidationError("input has " + std::to_string(channels) +
                          " channels, config expects " + std::to_string(cfg_.channels));
  dsp::Spectrogram spec = stft_.forward(interleaved, n_samples, channels);
  const int T = spec.frames;
  const int bands = this->bands();
  const int ref = cfg_.ref_channel0();

  Tensor power_raw({T, bands});
  if (s2m_) {
    power_raw = dsp::mel_power(spec, fb_, ref, nullptr);
  } else {
    for (int t = 0; t < T; t++) {
      const std::complex<float>* r = spec.at(t, ref);
      for (int f = 0; f < bands; f++) power_raw.at2(t, f) = std::norm(r[f]);
    }
  }

  // keep the raw reference channel when the caller wants a waveform
  dsp::Spectrogram raw_ref;
  if (want_wave) {
    raw_ref = dsp::Spectrogram(T, 1, spec.bins);
    for (int t = 0; t < T; t++)
      std::memcpy(raw_ref.at(t, 0), spec.at(t, ref),
                  static_cast<size_t>(spec.bins) * sizeof(std::complex<float>));
  }

  dsp::NormState norm;
  dsp::normalize(spec, ref, cfg_.norm_decay, norm);

  Tensor supp({T, bands});
  if (s2m_) {
    Tensor p = dsp::mel_power(spec, fb_, ref, nullptr);
    for (int64_t i = 0; i < p.numel(); i++)
      supp[i] = std::log(p[i] + dsp::kLogFloor);
  } else {
    for (int t = 0; t < T; t++) {
      const std::complex<float>* r = spec.at(t, ref);
      for (int f = 0; f < bands; f++)
        supp.at2(t, f) = std::log(std::norm(r[f]) + dsp::kLogFloor);
    }
  }

  Tensor features;
  if (s2m_) {
    features = s2m_->forward(spec, net);
  } else {
    features = Tensor({T, bands, 2 * cfg_.channels});
    for (int t = 0; t < T; t++)
      for (int f = 0; f < bands; f++) {
        float* row = features.data() +
                     (static_cast<size_t>(t) * bands + f) * 2 * cfg_.channels;
        for (int ch = 0; ch < cfg_.channels; ch++) {
          const std::complex<float> v = spec.at(t, ch)[f];
          row[2 * ch] = v.real();
          row[2 * ch + 1] = v.imag();
        }
      }
  }

  Result res;
  res.mask = bb_.forward(features, supp, net);
  res.logmel = dsp::apply_mask_log(power_raw, res.mask);

  if (want_wave) {
    if (s2m_) {
      res.wave = dsp::pseudo_inverse_reconstruct(raw_ref, res.mask, fb_, stft_, 0);
    } else {
      dsp::Spectrogram masked(T, 1, spec.bins);
      for (int t = 0; t < T; t++) {
        const std::complex<float>* src = raw_ref.at(t, 0);
        std::complex<float>* dst = masked.at(t, 0);
        for (int f = 0; f < spec.bins; f++) dst[f] = src[f] * res.mask.at2(t, f);
      }
      res.wave = stft_.inverse(masked, 0);
    }
  }
  return res;
}

}  // namespace melstream
