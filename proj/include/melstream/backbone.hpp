// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Mask estimator: four cascaded modules over [band, feature] frames.
//   m1: full-band spatial   - BiLSTM along the band axis, per frame
//   m2: narrow-band spatial - one LSTM over time per band, weights shared
//   m3: sub-band spectral   - LSTM over time with a band neighborhood and
//                             the reference-channel power as extra input
//   m4: full-band spectral  - BiLSTM along bands over recent-frame context,
//                             also fed the reference power
// then a linear layer and a sigmoid, so the mask lives in [0,1] without
// clamping. Time-axis modules are strictly causal; band-axis modules are
// per-frame, so the whole cascade is causal. Any module can be bypassed
// (identity) for ablation accounting.

#pragma once

#include <vector>

#include "melstream/archive.hpp"
#include "melstream/nn.hpp"
#include "melstream/run_config.hpp"

namespace melstream {

struct BackboneState {
  PackedMat h2, c2;  // narrow-band LSTM state per band
  PackedMat h3, c3;  // sub-band LSTM state per band
  std::vector<PackedMat> ctx;  // previous context-1 frames of m4 input features
  int ctx_pos = 0;

  void reset();
  size_t footprint_bytes() const;
};

struct BackboneScratch {
  PackedMat gates_a, gates_b;  // [F', 4*h_max]
  PackedMat seq_out;           // [F', 2*h_max] BiLSTM concat
  PackedMat out_a, out_b;      // module outputs, ping-pong
  PackedMat assemble;          // neighborhood/context input rows
  PackedMat mask_col;          // [F', 1]
  AlignedBuf h_f, c_f, h_r, c_r;  // single-sequence scan states
  AlignedBuf mask;                // [F'] contiguous for the final sigmoid
};

class Backbone {
 public:
  Backbone(const PipelineConfig& cfg, const TensorMap& weights);

  int bands() const { return bands_; }
  int input_dim() const { return din_; }

  BackboneState make_state() const;
  BackboneScratch make_scratch() const;

  // One frame: features [F', din] (padded rows), supp [F'] log reference
  // power; writes the mask into mask_out[F'].
  void frame(const PackedMat& features, const float* supp, BackboneState& st,
             float* mask_out, BackboneScratch& s, OpCounter* c) const;

  // Batch convenience: features [T, F', din], supp [T, F'] -> mask [T, F'].
  Tensor forward(const Tensor& features, const Tensor& supp, OpCounter* c = nullptr) const;

 private:
  struct BiModule {
    nn::PackedLstm fwd, rev;
    nn::PackedLinear lin;
  };
  struct TimeModule {
    nn::PackedLstm cell;
    nn::PackedLinear lin;
  };

  void run_bi_module(const BiModule& m, const PackedMat& in, PackedMat& out,
                     BackboneScratch& s, OpCounter* c) const;

  BackboneConfig cfg_;
  int bands_ = 0;
  int din_ = 0;
  int m3_in_ = 0, m4_in_ = 0;
  BiModule m1_, m4_;
  TimeModule m2_, m3_;
  nn::PackedLinear out_;
};

}  // namespace melstream
