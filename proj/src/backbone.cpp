// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/backbone.hpp"

#include <algorithm>
#include <cstring>

namespace melstream {

namespace {

const Tensor& get(const TensorMap& w, const std::string& name) {
  auto it = w.find(name);
  if (it == w.end()) throw ValidationError("missing weight tensor: " + name);
  return it->second;
}

nn::PackedLstm load_lstm(const TensorMap& w, const std::string& p) {
  return nn::PackedLstm::pack(get(w, p + ".Wx"), get(w, p + ".Wh"), get(w, p + ".b"));
}

nn::PackedLinear load_linear(const TensorMap& w, const std::string& p) {
  const Tensor& b = get(w, p + ".b");
  return nn::PackedLinear::pack(get(w, p + ".W"), &b);
}

}  // namespace

void BackboneState::reset() {
  h2.zero();
  c2.zero();
  h3.zero();
  c3.zero();
  for (auto& m : ctx) m.zero();
  ctx_pos = 0;
}

size_t BackboneState::footprint_bytes() const {
  size_t n = h2.footprint_bytes() + c2.footprint_bytes() + h3.footprint_bytes() +
             c3.footprint_bytes();
  for (const auto& m : ctx) n += m.footprint_bytes();
  return n;
}

Backbone::Backbone(const PipelineConfig& cfg, const TensorMap& weights)
    : cfg_(cfg.backbone), bands_(cfg.bands()), din_(cfg.feature_dim()) {
  int d = din_;
  if (cfg_.enable[0]) {
    m1_.fwd = load_lstm(weights, "bb.m1.f");
    m1_.rev = load_lstm(weights, "bb.m1.r");
    m1_.lin = load_linear(weights, "bb.m1.lin");
    d = cfg_.module_out;
  }
  if (cfg_.enable[1]) {
    m2_.cell = load_lstm(weights, "bb.m2");
    m2_.lin = load_linear(weights, "bb.m2.lin");
    d = cfg_.module_out;
  }
  if (cfg_.enable[2]) {
    m3_in_ = (cfg_.n1 + cfg_.n2 + 1) * d + 1;
    m3_.cell = load_lstm(weights, "bb.m3");
    m3_.lin = load_linear(weights, "bb.m3.lin");
    if (m3_.cell.in != m3_in_) throw ValidationError("bb.m3 input width mismatch");
    d = cfg_.module_out;
  }
  if (cfg_.enable[3]) {
    m4_in_ = cfg_.context * d + 1;
    m4_.fwd = load_lstm(weights, "bb.m4.f");
    m4_.rev = load_lstm(weights, "bb.m4.r");
    m4_.lin = load_linear(weights, "bb.m4.lin");
    if (m4_.fwd.in != m4_in_) throw ValidationError("bb.m4 input width mismatch");
    d = cfg_.module_out;
  }
  out_ = load_linear(weights, "bb.out");
  if (out_.in != d) throw ValidationError("bb.out input width mismatch");
}

BackboneState Backbone::make_state() const {
  BackboneState st;
  if (cfg_.enable[1]) {
    st.h2.resize(bands_, cfg_.hidden[1]);
    st.c2.resize(bands_, cfg_.hidden[1]);
  }
  if (cfg_.enable[2]) {
    st.h3.resize(bands_, cfg_.hidden[2]);
    st.c3.resize(bands_, cfg_.hidden[2]);
  }
  if (cfg_.enable[3] && cfg_.context > 1) {
    st.ctx.resize(cfg_.context - 1);
    const int d = m4_.fwd.in > 0 ? (m4_in_ - 1) / cfg_.context : cfg_.module_out;
    for (auto& m : st.ctx) m.resize(bands_, d);
  }
  return st;
}

BackboneScratch Backbone::make_scratch() const {
  const int hmax = *std::max_element(cfg_.hidden.begin(), cfg_.hidden.end());
  const int dmax = std::max({din_, cfg_.module_out});
  const int in_max = std::max({m3_in_, m4_in_, 1});
  BackboneScratch s;
  s.gates_a.resize(bands_, 4 * hmax);
  s.gates_b.resize(bands_, 4 * hmax);
  s.seq_out.resize(bands_, 2 * hmax);
  s.out_a.resize(bands_, dmax);
  s.out_b.resize(bands_, dmax);
  s.assemble.resize(bands_, in_max);
  s.mask_col.resize(bands_, 1);
  s.h_f.resize(round_up16(hmax));
  s.c_f.resize(round_up16(hmax));
  s.h_r.resize(round_up16(hmax));
  s.c_r.resize(round_up16(hmax));
  s.mask.resize(round_up16(bands_));
  return s;
}

void Backbone::run_bi_module(const BiModule& m, const PackedMat& in, PackedMat& out,
                             BackboneScratch& s, OpCounter* c) const {
  const int h = m.fwd.hid;
  nn::lstm_xgates(m.fwd, in.row(0), in.stride, bands_, s.gates_a.row(0),
                  s.gates_a.stride, c);
  nn::lstm_xgates(m.rev, in.row(0), in.stride, bands_, s.gates_b.row(0),
                  s.gates_b.stride, c);
  s.h_f.zero();
  s.c_f.zero();
  for (int b = 0; b < bands_; b++) {
    nn::lstm_step_single(m.fwd, s.gates_a.row(b), s.h_f.data(), s.c_f.data(), c);
    std::memcpy(s.seq_out.row(b), s.h_f.data(), static_cast<size_t>(h) * sizeof(float));
  }
  s.h_r.zero();
  s.c_r.zero();
  for (int b = bands_ - 1; b >= 0; b--) {
    nn::lstm_step_single(m.rev, s.gates_b.row(b), s.h_r.data(), s.c_r.data(), c);
    std::memcpy(s.seq_out.row(b) + h, s.h_r.data(), static_cast<size_t>(h) * sizeof(float));
  }
  m.lin.gemm(s.seq_out.row(0), s.seq_out.stride, bands_, out.row(0), out.stride,
             false, true, c);
}

void Backbone::frame(const PackedMat& features, const float* supp, BackboneState& st,
                     float* mask_out, BackboneScratch& s, OpCounter* c) const {
  const PackedMat* cur = &features;
  int d = din_;
  const int dout = cfg_.module_out;

  if (cfg_.enable[0]) {
    run_bi_module(m1_, *cur, s.out_a, s, c);
    cur = &s.out_a;
    d = dout;
  }

  if (cfg_.enable[1]) {
    nn::lstm_xgates(m2_.cell, cur->row(0), cur->stride, bands_, s.gates_a.row(0),
                    s.gates_a.stride, c);
    nn::lstm_step_batch(m2_.cell, s.gates_a.row(0), s.gates_a.stride, st.h2.row(0),
                        st.h2.stride, st.c2.row(0), st.c2.stride, bands_, c);
    m2_.lin.gemm(st.h2.row(0), st.h2.stride, bands_, s.out_b.row(0), s.out_b.stride,
                 false, true, c);
    cur = &s.out_b;
    d = dout;
  }

  if (cfg_.enable[2]) {
    // neighborhood rows: bands n1 below through n2 above (edge-clamped),
    // then the reference power of the band itself
    const int width = cfg_.n1 + cfg_.n2 + 1;
    for (int b = 0; b < bands_; b++) {
      float* row = s.assemble.row(b);
      for (int j = 0; j < width; j++) {
        const int src = std::clamp(b - cfg_.n1 + j, 0, bands_ - 1);
        std::memcpy(row + static_cast<size_t>(j) * d, cur->row(src),
                    static_cast<size_t>(d) * sizeof(float));
      }
      row[static_cast<size_t>(width) * d] = supp[b];
    }
    nn::lstm_xgates(m3_.cell, s.assemble.row(0), s.assemble.stride, bands_,
                    s.gates_a.row(0), s.gates_a.stride, c);
    nn::lstm_step_batch(m3_.cell, s.gates_a.row(0), s.gates_a.stride, st.h3.row(0),
                        st.h3.stride, st.c3.row(0), st.c3.stride, bands_, c);
    m3_.lin.gemm(st.h3.row(0), st.h3.stride, bands_, s.out_a.row(0), s.out_a.stride,
                 false, true, c);
    cur = &s.out_a;
    d = dout;
  }

  if (cfg_.enable[3]) {
    const int C = cfg_.context;
    for (int b = 0; b < bands_; b++) {
      float* row = s.assemble.row(b);
      for (int k = 0; k < C - 1; k++) {
        const PackedMat& past = st.ctx[(st.ctx_pos + k) % (C - 1)];
        std::memcpy(row + static_cast<size_t>(k) * d, past.row(b),
                    static_cast<size_t>(d) * sizeof(float));
      }
      std::memcpy(row + static_cast<size_t>(C - 1) * d, cur->row(b),
                  static_cast<size_t>(d) * sizeof(float));
      row[static_cast<size_t>(C) * d] = supp[b];
    }
    if (C > 1) {
      PackedMat& slot = st.ctx[st.ctx_pos];
      for (int b = 0; b < bands_; b++)
        std::memcpy(slot.row(b), cur->row(b), static_cast<size_t>(d) * sizeof(float));
      st.ctx_pos = (st.ctx_pos + 1) % (C - 1);
    }
    run_bi_module(m4_, s.assemble, s.out_b, s, c);
    cur = &s.out_b;
    d = dout;
  }

  out_.gemm(cur->row(0), cur->stride, bands_, s.mask_col.row(0), s.mask_col.stride,
            false, true, c);
  for (int b = 0; b < bands_; b++) s.mask[b] = s.mask_col.row(b)[0];
  simd::ops().sigmoid_ip(s.mask.data(), bands_);
  if (c) c->nonlins += static_cast<uint64_t>(bands_);
  std::memcpy(mask_out, s.mask.data(), static_cast<size_t>(bands_) * sizeof(float));
}

Tensor Backbone::forward(const Tensor& features, const Tensor& supp, OpCounter* c) const {
  if (features.rank() != 3 || features.dim(1) != bands_ || features.dim(2) != din_)
    throw ShapeError("backbone features must be [T," + std::to_string(bands_) + "," +
                     std::to_string(din_) + "], got " + features.shape_str());
  if (supp.rank() != 2 || supp.dim(0) != features.dim(0) || supp.dim(1) != bands_)
    throw ShapeError("supplementary power must be [T, bands]");
  const int T = static_cast<int>(features.dim(0));
  BackboneState st = make_state();
  BackboneScratch s = make_scratch();
  PackedMat feat(bands_, din_);
  Tensor mask({T, bands_});
  for (int t = 0; t < T; t++) {
    for (int b = 0; b < bands_; b++)
      std::memcpy(feat.row(b),
                  features.data() + (static_cast<size_t>(t) * bands_ + b) * din_,
                  static_cast<size_t>(din_) * sizeof(float));
    frame(feat, supp.data() + static_cast<size_t>(t) * bands_, st,
          mask.data() + static_cast<size_t>(t) * bands_, s, c);
  }
  return mask;
}

}  // namespace melstream
