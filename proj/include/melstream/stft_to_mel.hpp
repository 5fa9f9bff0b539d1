// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// STFT-to-Mel compression: projects multichannel STFT features to D-dim
// embeddings per (frame, bin), refines them with frequency convolutions,
// compresses linear bins to Mel bands, and smooths over time with a causal
// convolution. The proposed form runs separate magnitude/phase branches with
// gated cross-branch communication; the joint variants stack real+imag into
// a single branch and are selectable for ablation runs.
//
// Temporal causality: the only cross-frame memory is the causal time-smooth
// ring; everything else is per-frame.

#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "melstream/archive.hpp"
#include "melstream/dsp.hpp"
#include "melstream/nn.hpp"
#include "melstream/run_config.hpp"

namespace melstream {

// Ring of the last time_kernel-1 pre-smoothing frames, zero-initialized to
// realize the zero past-padding.
struct TsbState {
  std::vector<PackedMat> past;  // each [F', stack_width]
  int pos = 0;
  void reset() {
    for (auto& m : past) m.zero();
    pos = 0;
  }
  size_t footprint_bytes() const {
    size_t n = 0;
    for (const auto& m : past) n += m.footprint_bytes();
    return n;
  }
};

struct S2mScratch {
  PackedMat feat_a, feat_b;    // raw per-bin features (mag / phase or joint)
  PackedMat emb_a, emb_b;      // [F, D] branch embeddings
  PackedMat pad_a;             // [F + fk - 1, D] zero-edged conv input
  PackedMat conv_out;          // [F, D]
  PackedMat comm_src;          // pre-exchange copy
  PackedMat comm_gate;         // tanh(linear(.)) gate values
  PackedMat post_a, post_b;    // [F', D] after frequency compression
  PackedMat stacked;           // [F', stack_width]
};

class StftToMel {
 public:
  StftToMel(const PipelineConfig& cfg, const dsp::MelFilterbank& fb,
            const TensorMap& weights);

  int out_bands() const { return fb_->n_mels; }
  int embed_dim() const { return cfg_.embed_dim; }
  int stack_width() const;  // time-smooth input width (2D separate, D joint)
  bool has_tsb() const;

  S2mScratch make_scratch() const;
  TsbState make_tsb_state() const;

  // One frame: `spec` holds channels*bins normalized STFT coefficients laid
  // out [channel][bin]; writes the [F', D] embedding into `out`.
  void frame(const std::complex<float>* spec, TsbState& tsb, PackedMat& out,
             S2mScratch& s, OpCounter* c) const;

  // Batch convenience over a normalized spectrogram: [T, F', D].
  Tensor forward(const dsp::Spectrogram& spec, OpCounter* c = nullptr) const;

 private:
  struct FcbBlock {
    std::vector<nn::PackedLinear> taps;
    AlignedBuf bias;
    nn::LnParams ln;
  };
  struct Branch {
    nn::PackedLinear lin;
    nn::LnParams lin_ln;
    bool relu = false;
    std::vector<FcbBlock> fcb;
  };
  struct Comm {
    nn::PackedLinear p2m;                 // gate on branch B feeding branch A
    std::optional<nn::PackedLinear> m2p;  // gate on branch A feeding branch B
  };
  struct TrainMel {
    std::vector<AlignedBuf> w;  // per band, over the triangle support
    std::vector<float> bias;
  };

  void build_features(const std::complex<float>* spec, S2mScratch& s) const;
  void run_branch_lin(const Branch& b, const PackedMat& feat, PackedMat& emb,
                      OpCounter* c) const;
  void run_fcb_block(const Branch& b, int block, PackedMat& emb, S2mScratch& s,
                     OpCounter* c) const;
  void run_comm(int exchange, S2mScratch& s, OpCounter* c) const;
  void apply_handcrafted(const PackedMat& emb, PackedMat& post, OpCounter* c) const;
  void apply_learnable(const PackedMat& emb, PackedMat& post, OpCounter* c) const;
  void apply_trainmel(const PackedMat& emb, PackedMat& post, OpCounter* c) const;
  void run_tsb(const PackedMat& stacked, TsbState& tsb, PackedMat& out,
               OpCounter* c) const;

  Stft2MelConfig cfg_;
  int channels_ = 0;
  int bins_ = 0;
  const dsp::MelFilterbank* fb_ = nullptr;
  Branch mag_, pha_;  // pha_ unused for joint variants; mag_ holds the joint branch
  std::vector<Comm> comm_;
  std::optional<nn::PackedLinear> learnable_fb_;
  std::vector<float> learnable_fb_bias_;
  std::optional<TrainMel> trainmel_;
  std::vector<nn::PackedLinear> tsb_taps_;
  AlignedBuf tsb_bias_;
};

}  // namespace melstream
