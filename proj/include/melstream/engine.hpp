// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Frame-synchronous orchestration of the whole pipeline. A Stream owns all
// per-stream memory (STFT ring, normalization state, time-smooth ring,
// recurrent states, scratch) so its footprint is constant in stream length,
// many streams can run concurrently, and reset() restores a bit-identical
// fresh start. offline() runs the same math over a whole utterance.
//
// Streaming contract: push() takes exactly hop samples per channel,
// interleaved. The first frame appears once the first analysis window is
// complete (one window of algorithmic latency), then one frame per push.
// Outputs for frame t depend only on samples delivered up to t*hop +
// fft_size/2 - 1, matching the batch path exactly.

#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "melstream/archive.hpp"
#include "melstream/backbone.hpp"
#include "melstream/dsp.hpp"
#include "melstream/run_config.hpp"
#include "melstream/stft_to_mel.hpp"

namespace melstream {

class Engine {
 public:
  Engine(const PipelineConfig& cfg, const TensorMap& weights);

  const PipelineConfig& config() const { return cfg_; }
  int bands() const { return cfg_.bands(); }
  const dsp::Stft& stft() const { return stft_; }
  const dsp::MelFilterbank& filterbank() const { return fb_; }

  struct StageSeconds {
    double frontend = 0, compress = 0, backbone = 0;
    double total() const { return frontend + compress + backbone; }
  };

  class Stream {
   public:
    // One hop of interleaved samples (hop * channels floats). Returns true
    // when a frame was emitted into logmel[bands] and mask[bands].
    bool push(const float* block, float* logmel, float* mask);
    void reset();

    int64_t frames_emitted() const { return frames_; }
    size_t state_bytes() const;
    OpCounter& net_counter() { return net_; }
    void enable_timing(bool on) { timing_ = on; }
    const StageSeconds& stage_seconds() const { return stages_; }

   private:
    friend class Engine;
    explicit Stream(const Engine* e);
    void compute_frame(int64_t t, float* logmel, float* mask);
    float ring_at(int ch, int64_t idx) const;

    const Engine* eng_;
    std::vector<float> ring_;  // last fft_size raw samples per channel
    int64_t samples_seen_ = 0;
    int64_t frames_ = 0;
    dsp::NormState norm_;
    std::vector<float> window_;
    std::vector<std::complex<float>> spec_;  // one frame, [channel][bin]
    AlignedBuf power_raw_, supp_;
    PackedMat feat_;
    S2mScratch s2m_scratch_;
    TsbState tsb_;
    BackboneScratch bb_scratch_;
    BackboneState bb_state_;
    OpCounter net_;
    bool timing_ = false;
    StageSeconds stages_;
  };

  Stream open_stream() const { return Stream(this); }

  struct Result {
    Tensor logmel;            // [T, bands]
    Tensor mask;              // [T, bands]
    std::vector<float> wave;  // reconstruction, when requested
  };

  Result offline(const float* interleaved, int64_t n_samples, int channels,
                 bool want_wave = false, OpCounter* net = nullptr) const;

 private:
  PipelineConfig cfg_;
  dsp::Stft stft_;
  dsp::MelFilterbank fb_;
  std::optional<StftToMel> s2m_;
  Backbone bb_;
};

}  // namespace melstream
