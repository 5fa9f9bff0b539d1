// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/stft_to_mel.hpp"

#include <cmath>
#include <cstring>

namespace melstream {

namespace {

const Tensor& get(const TensorMap& w, const std::string& name) {
  auto it = w.find(name);
  if (it == w.end()) throw ValidationError("missing weight tensor: " + name);
  return it->second;
}

// Splits a conv kernel [out, in, k] into k tap matrices [out, in].
std::vector<nn::PackedLinear> split_taps(const Tensor& kernel) {
  const int out = static_cast<int>(kernel.dim(0));
  const int in = static_cast<int>(kernel.dim(1));
  const int k = static_cast<int>(kernel.dim(2));
  std::vector<nn::PackedLinear> taps;
  taps.reserve(k);
  for (int j = 0; j < k; j++) {
    Tensor w({out, in});
    for (int o = 0; o < out; o++)
      for (int i = 0; i < in; i++) w.at2(o, i) = kernel.at3(o, i, j);
    taps.push_back(nn::PackedLinear::pack(w, nullptr));
  }
  return taps;
}

AlignedBuf padded_bias(const Tensor& b) {
  AlignedBuf buf(round_up16(static_cast<int>(b.dim(0))));
  std::memcpy(buf.data(), b.data(), static_cast<size_t>(b.numel()) * sizeof(float));
  return buf;
}

}  // namespace

StftToMel::StftToMel(const PipelineConfig& cfg, const dsp::MelFilterbank& fb,
                     const TensorMap& weights)
    : cfg_(cfg.s2m), channels_(cfg.channels), bins_(cfg.stft.bins()), fb_(&fb) {
  const bool separate = cfg_.variant == Variant::separate_fcb_tsb;
  const bool with_fcb = separate || cfg_.variant == Variant::joint_fcb ||
                        cfg_.variant == Variant::joint_fcb_tsb;

  auto load_branch = [&](const std::string& prefix, bool relu, bool fcb) {
    Branch b;
    b.relu = relu;
    const Tensor& bias = get(weights, prefix + ".lin.b");
    b.lin = nn::PackedLinear::pack(get(weights, prefix + ".lin.W"), &bias);
    b.lin_ln = nn::LnParams::pack(get(weights, prefix + ".lin.ln.g"),
                                  get(weights, prefix + ".lin.ln.b"));
    if (fcb) {
      for (int i = 0; i < cfg_.conv_blocks; i++) {
        const std::string p = prefix + ".fcb." + std::to_string(i);
        FcbBlock blk;
        blk.taps = split_taps(get(weights, p + ".K"));
        blk.bias = padded_bias(get(weights, p + ".b"));
        blk.ln = nn::LnParams::pack(get(weights, p + ".ln.g"), get(weights, p + ".ln.b"));
        b.fcb.push_back(std::move(blk));
      }
    }
    return b;
  };

  if (separate) {
    mag_ = load_branch("s2m.mag", true, true);
    pha_ = load_branch("s2m.pha", false, true);
    const int exchanges = cfg_.comm_per_block ? cfg_.conv_blocks : 1;
    for (int i = 0; i < exchanges; i++) {
      const std::string p = "s2m.comm." + std::to_string(i);
      Comm c;
      const Tensor& pb = get(weights, p + ".p2m.b");
      c.p2m = nn::PackedLinear::pack(get(weights, p + ".p2m.W"), &pb);
      if (cfg_.comm_bidirectional) {
        const Tensor& mb = get(weights, p + ".m2p.b");
        c.m2p = nn::PackedLinear::pack(get(weights, p + ".m2p.W"), &mb);
      }
      comm_.push_back(std::move(c));
    }
    learnable_fb_ = nn::PackedLinear::pack(get(weights, "s2m.pha.fb.W"), nullptr);
    const Tensor& fbb = get(weights, "s2m.pha.fb.b");
    learnable_fb_bias_.assign(fbb.data(), fbb.data() + fbb.numel());
  } else {
    mag_ = load_branch("s2m.joint", true, with_fcb);
    if (cfg_.variant == Variant::joint_trainmel) {
      TrainMel tm;
      for (int m = 0; m < fb.n_mels; m++) {
        const Tensor& w = get(weights, "s2m.tm." + std::to_string(m) + ".w");
        if (w.numel() != fb.hi[m] - fb.lo[m])
          throw ValidationError("trainmel filter length mismatch at band " + std::to_string(m));
        AlignedBuf buf(static_cast<size_t>(w.numel()));
        std::memcpy(buf.data(), w.data(), static_cast<size_t>(w.numel()) * sizeof(float));
        tm.w.push_back(std::move(buf));
      }
      const Tensor& tb = get(weights, "s2m.tm.b");
      tm.bias.assign(tb.data(), tb.data() + tb.numel());
      trainmel_ = std::move(tm);
    }
  }

  if (has_tsb()) {
    tsb_taps_ = split_taps(get(weights, "s2m.tsb.K"));
    tsb_bias_ = padded_bias(get(weights, "s2m.tsb.b"));
  }
}

int StftToMel::stack_width() const {
  return cfg_.variant == Variant::separate_fcb_tsb ? 2 * cfg_.embed_dim : cfg_.embed_dim;
}

bool StftToMel::has_tsb() const {
  return cfg_.variant == Variant::separate_fcb_tsb ||
         cfg_.variant == Variant::joint_fcb_tsb;
}

S2mScratch StftToMel::make_scratch() const {
  const int D = cfg_.embed_dim;
  const int Fp = fb_->n_mels;
  S2mScratch s;
  s.feat_a.resize(bins_, 2 * channels_);
  s.feat_b.resize(bins_, 2 * channels_);
  s.emb_a.resize(bins_, D);
  s.emb_b.resize(bins_, D);
  s.pad_a.resize(bins_ + cfg_.freq_kernel - 1, D);
  s.conv_out.resize(bins_, D);
  s.comm_src.resize(bins_, D);
  s.comm_gate.resize(bins_, D);
  s.post_a.resize(Fp, D);
  s.post_b.resize(Fp, D);
  s.stacked.resize(Fp, stack_width());
  return s;
}

TsbState StftToMel::make_tsb_state() const {
  TsbState t;
  if (has_tsb()) {
    t.past.resize(cfg_.time_past_pad);
    for (auto& m : t.past) m.resize(fb_->n_mels, stack_width());
  }
  return t;
}

void StftToMel::build_features(const std::complex<float>* spec, S2mScratch& s) const {
  const int M = channels_;
  if (cfg_.variant == Variant::separate_fcb_tsb) {
    // magnitude branch: M magnitudes; phase branch: cos/sin per channel
    for (int f = 0; f < bins_; f++) {
      float* fa = s.feat_a.row(f);
      float* fb = s.feat_b.row(f);
      for (int m = 0; m < M; m++) {
        const std::complex<float> v = spec[static_cast<size_t>(m) * bins_ + f];
        const float mag = std::abs(v);
        fa[m] = mag;
        if (mag > 1e-12f) {
          fb[2 * m] = v.real() / mag;
          fb[2 * m + 1] = v.imag() / mag;
        } else {
          fb[2 * m] = 0.f;
          fb[2 * m + 1] = 0.f;
        }
      }
    }
  } else {
    // joint: stacked real and imaginary parts
    for (int f = 0; f < bins_; f++) {
      float* fa = s.feat_a.row(f);
      for (int m = 0; m < M; m++) {
        const std::complex<float> v = spec[static_cast<size_t>(m) * bins_ + f];
        fa[2 * m] = v.real();
        fa[2 * m + 1] = v.imag();
      }
    }
  }
}

void StftToMel::run_branch_lin(const Branch& b, const PackedMat& feat, PackedMat& emb,
                               OpCounter* c) const {
  b.lin.gemm(feat.row(0), feat.stride, bins_, emb.row(0), emb.stride, false, true, c);
  if (b.relu) {
    for (int f = 0; f < bins_; f++) simd::ops().relu_ip(emb.row(f), b.lin.out);
    if (c) c->nonlins += static_cast<uint64_t>(bins_) * b.lin.out;
  }
  nn::layer_norm_rows(emb.row(0), emb.stride, bins_, b.lin.out, b.lin_ln.gamma.data(),
                      b.lin_ln.beta.data(), nn::kLayerNormEps, c);
}

void StftToMel::run_fcb_block(const Branch& b, int block, PackedMat& emb, S2mScratch& s,
                              OpCounter* c) const {
  const int D = cfg_.embed_dim;
  const int off = cfg_.freq_kernel / 2;
  // zero-edged copy so every tap multiplies a full column of rows
  for (int f = 0; f < bins_; f++)
    std::memcpy(s.pad_a.row(f + off), emb.row(f), static_cast<size_t>(D) * sizeof(float));
  const FcbBlock& blk = b.fcb[block];
  for (int j = 0; j < cfg_.freq_kernel; j++) {
    blk.taps[j].gemm(s.pad_a.row(j), s.pad_a.stride, bins_, s.conv_out.row(0),
                     s.conv_out.stride, j != 0, false, c);
  }
  for (int f = 0; f < bins_; f++) {
    float* row = s.conv_out.row(f);
    const float* bias = blk.bias.data();
    for (int d = 0; d < D; d++) row[d] += bias[d];
  }
  if (c) c->adds += static_cast<uint64_t>(bins_) * D;
  if (b.relu) {
    for (int f = 0; f < bins_; f++) simd::ops().relu_ip(s.conv_out.row(f), D);
    if (c) c->nonlins += static_cast<uint64_t>(bins_) * D;
  }
  nn::layer_norm_rows(s.conv_out.row(0), s.conv_out.stride, bins_, D,
                      blk.ln.gamma.data(), blk.ln.beta.data(), nn::kLayerNormEps, c);
  std::swap(emb.buf, s.conv_out.buf);
}

void StftToMel::run_comm(int exchange, S2mScratch& s, OpCounter* c) const {
  const int D = cfg_.embed_dim;
  const Comm& cm = comm_[exchange];
  const auto& k = simd::ops();
  // both gates read the pre-exchange embeddings
  std::memcpy(s.comm_src.buf.data(), s.emb_a.buf.data(),
              s.emb_a.buf.size() * sizeof(float));
  cm.p2m.gemm(s.emb_b.row(0), s.emb_b.stride, bins_, s.comm_gate.row(0),
              s.comm_gate.stride, false, true, c);
  for (int f = 0; f < bins_; f++) {
    k.tanh_ip(s.comm_gate.row(f), D);
    k.mul_ip(s.emb_a.row(f), s.comm_gate.row(f), D);
  }
  if (c) {
    c->nonlins += static_cast<uint64_t>(bins_) * D;
    c->adds += static_cast<uint64_t>(bins_) * D;
  }
  if (cm.m2p) {
    cm.m2p->gemm(s.comm_src.row(0), s.comm_src.stride, bins_, s.comm_gate.row(0),
                 s.comm_gate.stride, false, true, c);
    for (int f = 0; f < bins_; f++) {
      k.tanh_ip(s.comm_gate.row(f), D);
      k.mul_ip(s.emb_b.row(f), s.comm_gate.row(f), D);
    }
    if (c) {
      c->nonlins += static_cast<uint64_t>(bins_) * D;
      c->adds += static_cast<uint64_t>(bins_) * D;
    }
  }
}

void StftToMel::apply_handcrafted(const PackedMat& emb, PackedMat& post,
                                  OpCounter* c) const {
  const int D = cfg_.embed_dim;
  for (int m = 0; m < fb_->n_mels; m++) {
    const int lo = fb_->lo[m], hi = fb_->hi[m];
    simd::ops().axpy_rows(post.row(m), emb.row(lo), emb.stride,
                          fb_->weights.data() + static_cast<size_t>(m) * fb_->n_bins + lo,
                          hi - lo, D, nullptr, false);
  }
  if (c) c->macs += static_cast<uint64_t>(fb_->nnz()) * D;
}

void StftToMel::apply_learnable(const PackedMat& emb, PackedMat& post,
                                OpCounter* c) const {
  const int D = cfg_.embed_dim;
  for (int m = 0; m < fb_->n_mels; m++) {
    simd::ops().axpy_rows(post.row(m), emb.row(0), emb.stride,
                          learnable_fb_->w.row(m), bins_, D, nullptr, false);
    const float b = learnable_fb_bias_[m];
    float* row = post.row(m);
    for (int d = 0; d < D; d++) row[d] += b;
  }
  if (c) {
    c->macs += static_cast<uint64_t>(fb_->n_mels) * bins_ * D;
    c->adds += static_cast<uint64_t>(fb_->n_mels) * D;
  }
}

void StftToMel::apply_trainmel(const PackedMat& emb, PackedMat& post,
                               OpCounter* c) const {
  const int D = cfg_.embed_dim;
  for (int m = 0; m < fb_->n_mels; m++) {
    const int lo = fb_->lo[m], hi = fb_->hi[m];
    simd::ops().axpy_rows(post.row(m), emb.row(lo), emb.stride,
                          trainmel_->w[m].data(), hi - lo, D, nullptr, false);
    const float b = trainmel_->bias[m];
    float* row = post.row(m);
    for (int d = 0; d < D; d++) row[d] += b;
  }
  if (c) {
    c->macs += static_cast<uint64_t>(fb_->nnz()) * D;
    c->adds += static_cast<uint64_t>(fb_->n_mels) * D;
  }
}

void StftToMel::run_tsb(const PackedMat& stacked, TsbState& tsb, PackedMat& out,
                        OpCounter* c) const {
  const int Fp = fb_->n_mels;
  const int tk = cfg_.time_kernel;
  const int past = cfg_.time_past_pad;
  // taps run oldest -> current so the streaming and batch paths accumulate
  // in the same order
  for (int j = 0; j < tk; j++) {
    const PackedMat& src =
        j == tk - 1 ? stacked : tsb.past[(tsb.pos + j) % past];
    tsb_taps_[j].gemm(src.row(0), src.stride, Fp, out.row(0), out.stride, j != 0,
                      false, c);
  }
  for (int m = 0; m < Fp; m++) {
    float* row = out.row(m);
    const float* bias = tsb_bias_.data();
    for (int d = 0; d < cfg_.embed_dim; d++) row[d] += bias[d];
  }
  if (c) c->adds += static_cast<uint64_t>(Fp) * cfg_.embed_dim;
  if (past > 0) {
    PackedMat& slot = tsb.past[tsb.pos];
    std::memcpy(slot.buf.data(), stacked.buf.data(),
                slot.buf.size() * sizeof(float));
    tsb.pos = (tsb.pos + 1) % past;
  }
}

void StftToMel::frame(const std::complex<float>* spec, TsbState& tsb, PackedMat& out,
                      S2mScratch& s, OpCounter* c) const {
  const bool separate = cfg_.variant == Variant::separate_fcb_tsb;
  build_features(spec, s);

  run_branch_lin(mag_, s.feat_a, s.emb_a, c);
  if (separate) run_branch_lin(pha_, s.feat_b, s.emb_b, c);

  if (!mag_.fcb.empty()) {
    for (int i = 0; i < cfg_.conv_blocks; i++) {
      run_fcb_block(mag_, i, s.emb_a, s, c);
      if (separate) {
        run_fcb_block(pha_, i, s.emb_b, s, c);
        if (cfg_.comm_per_block)
          run_comm(i, s, c);
        else if (i == cfg_.conv_blocks - 1)
          run_comm(0, s, c);
      }
    }
  }

  switch (cfg_.variant) {
    case Variant::separate_fcb_tsb:
      apply_handcrafted(s.emb_a, s.post_a, c);
      apply_learnable(s.emb_b, s.post_b, c);
      break;
    case Variant::joint_trainmel:
      apply_trainmel(s.emb_a, s.post_a, c);
      break;
    default:
      apply_handcrafted(s.emb_a, s.post_a, c);
      break;
  }

  const int D = cfg_.embed_dim;
  const int Fp = fb_->n_mels;
  if (separate) {
    for (int m = 0; m < Fp; m++) {
      std::memcpy(s.stacked.row(m), s.post_a.row(m), static_cast<size_t>(D) * sizeof(float));
      std::memcpy(s.stacked.row(m) + D, s.post_b.row(m), static_cast<size_t>(D) * sizeof(float));
    }
  } else {
    for (int m = 0; m < Fp; m++)
      std::memcpy(s.stacked.row(m), s.post_a.row(m), static_cast<size_t>(D) * sizeof(float));
  }

  if (has_tsb()) {
    run_tsb(s.stacked, tsb, out, c);
  } else {
    for (int m = 0; m < Fp; m++)
      std::memcpy(out.row(m), s.stacked.row(m), static_cast<size_t>(D) * sizeof(float));
  }
}

Tensor StftToMel::forward(const dsp::Spectrogram& spec, OpCounter* c) const {
  if (spec.bins != bins_ || spec.channels != channels_)
    throw ShapeError("spectrogram shape does not match compression config");
  const int D = cfg_.embed_dim;
  const int Fp = fb_->n_mels;
  Tensor out({spec.frames, Fp, D});
  S2mScratch s = make_scratch();
  TsbState tsb = make_tsb_state();
  PackedMat frame_out(Fp, D);
  for (int t = 0; t < spec.frames; t++) {
    frame(spec.at(t, 0), tsb, frame_out, s, c);
    for (int m = 0; m < Fp; m++)
      std::memcpy(out.data() + (static_cast<size_t>(t) * Fp + m) * D, frame_out.row(m),
                  static_cast<size_t>(D) * sizeof(float));
  }
  return out;
}

}  // namespace melstream
