// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/flops.hpp"

#include <chrono>
#include <cstdio>

#include "melstream/dsp.hpp"
#include "melstream/rng.hpp"

namespace melstream {

namespace {

std::string fmt(uint64_t v) { return std::to_string(v); }

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct RowBuilder {
  std::vector<LayerRow>& rows;
  void add(LayerRow r) {
    r.macs = r.macs_const + r.macs_per_unit * r.units;
    rows.push_back(std::move(r));
  }
};

}  // namespace

FlopsReport count_flops(const PipelineConfig& cfg) {
  cfg.validate();
  FlopsReport rep;
  rep.cfg = cfg;
  RowBuilder b{rep.rows};

  const uint64_t F = cfg.stft.bins();
  const uint64_t Fp = cfg.bands();
  const uint64_t D = cfg.s2m.embed_dim;
  const uint64_t M = cfg.channels;
  const uint64_t fk = cfg.s2m.freq_kernel;
  const uint64_t tk = cfg.s2m.time_kernel;
  const int Q = cfg.s2m.conv_blocks;

  if (cfg.scale == Scale::mel) {
    const dsp::MelFilterbank fb = dsp::build_mel_filterbank(cfg.stft, cfg.mel);
    const uint64_t nnz = static_cast<uint64_t>(fb.nnz());
    const bool separate = cfg.s2m.variant == Variant::separate_fcb_tsb;
    const bool with_fcb = separate || cfg.s2m.variant == Variant::joint_fcb ||
                          cfg.s2m.variant == Variant::joint_fcb_tsb;

    auto lin_row = [&](const std::string& name, uint64_t in, bool relu) {
      LayerRow r;
      r.name = name;
      r.params = D * in + D + 2 * D;
      r.units = F;
      r.macs_per_unit = D * in;
      r.adds = F * D + F * 5 * D;                 // bias + layer norm
      r.nonlins = F + (relu ? F * D : 0);         // rstd + relu
      b.add(r);
    };
    auto fcb_row = [&](const std::string& name, bool relu) {
      LayerRow r;
      r.name = name;
      r.params = D * D * fk + D + 2 * D;
      r.units = F;
      r.macs_per_unit = D * D * fk;
      r.adds = F * D + F * 5 * D;
      r.nonlins = F + (relu ? F * D : 0);
      b.add(r);
    };

    if (separate) {
      lin_row("s2m.mag.lin", M, true);
      lin_row("s2m.pha.lin", 2 * M, false);
      for (int i = 0; i < Q; i++) {
        fcb_row("s2m.mag.fcb." + std::to_string(i), true);
        fcb_row("s2m.pha.fcb." + std::to_string(i), false);
      }
      const int exchanges = cfg.s2m.comm_per_block ? Q : 1;
      const uint64_t dirs = cfg.s2m.comm_bidirectional ? 2 : 1;
      for (int i = 0; i < exchanges; i++) {
        LayerRow r;
        r.name = "s2m.comm." + std::to_string(i);
        r.params = dirs * (D * D + D);
        r.units = F;
        r.macs_per_unit = dirs * D * D;
        r.adds = dirs * (F * D + F * D);  // bias + gating product
        r.nonlins = dirs * F * D;         // tanh
        b.add(r);
      }
      {
        LayerRow r;
        r.name = "s2m.mag.fb";
        r.units = Fp;
        r.macs_const = nnz * D;
        b.add(r);
      }
      {
        LayerRow r;
        r.name = "s2m.pha.fb";
        r.params = Fp * F + Fp;
        r.units = Fp;
        r.macs_per_unit = F * D;
        r.adds = Fp * D;
        b.add(r);
      }
    } else {
      lin_row("s2m.joint.lin", 2 * M, true);
      if (with_fcb)
        for (int i = 0; i < Q; i++)
          fcb_row("s2m.joint.fcb." + std::to_string(i), true);
      LayerRow r;
      r.name = "s2m.joint.fb";
      r.units = Fp;
      r.macs_const = nnz * D;
      if (cfg.s2m.variant == Variant::joint_trainmel) {
        r.params = nnz + Fp;
        r.adds = Fp * D;
      }
      b.add(r);
    }

    if (separate || cfg.s2m.variant == Variant::joint_fcb_tsb) {
      const uint64_t S = separate ? 2 * D : D;
      LayerRow r;
      r.name = "s2m.tsb";
      r.params = D * S * tk + D;
      r.units = Fp;
      r.macs_per_unit = D * S * tk;
      r.adds = Fp * D;
      b.add(r);
    }
  }

  // mask estimator
  const uint64_t dout = cfg.backbone.module_out;
  const auto& bb = cfg.backbone;
  uint64_t d = cfg.feature_dim();

  auto lstm_params = [](uint64_t h, uint64_t in) { return 4 * h * (in + h) + 4 * h; };
  auto step_aux_nonlins = [](uint64_t h) { return 5 * h; };
  auto step_aux_adds = [](uint64_t h) { return 4 * h; };

  if (bb.enable[0]) {
    const uint64_t h = bb.hidden[0];
    LayerRow r;
    r.name = "bb.m1";
    r.params = 2 * lstm_params(h, d) + dout * 2 * h + dout;
    r.units = Fp;
    r.macs_per_unit = 2 * (4 * h * d + 4 * h * h) + dout * 2 * h;
    r.adds = Fp * (2 * 4 * h + 2 * step_aux_adds(h) + dout);
    r.nonlins = Fp * 2 * step_aux_nonlins(h);
    b.add(r);
    d = dout;
  }
  if (bb.enable[1]) {
    const uint64_t h = bb.hidden[1];
    LayerRow r;
    r.name = "bb.m2";
    r.params = lstm_params(h, d) + dout * h + dout;
    r.units = Fp;
    r.macs_per_unit = 4 * h * d + 4 * h * h + dout * h;
    r.adds = Fp * (4 * h + step_aux_adds(h) + dout);
    r.nonlins = Fp * step_aux_nonlins(h);
    b.add(r);
    d = dout;
  }
  if (bb.enable[2]) {
    const uint64_t h = bb.hidden[2];
    const uint64_t in = (bb.n1 + bb.n2 + 1) * d + 1;
    LayerRow r;
    r.name = "bb.m3";
    r.params = lstm_params(h, in) + dout * h + dout;
    r.units = Fp;
    r.macs_per_unit = 4 * h * in + 4 * h * h + dout * h;
    r.adds = Fp * (4 * h + step_aux_adds(h) + dout);
    r.nonlins = Fp * step_aux_nonlins(h);
    b.add(r);
    d = dout;
  }
  if (bb.enable[3]) {
    const uint64_t h = bb.hidden[3];
    const uint64_t in = bb.context * d + 1;
    LayerRow r;
    r.name = "bb.m4";
    r.params = 2 * lstm_params(h, in) + dout * 2 * h + dout;
    r.units = Fp;
    r.macs_per_unit = 2 * (4 * h * in + 4 * h * h) + dout * 2 * h;
    r.adds = Fp * (2 * 4 * h + 2 * step_aux_adds(h) + dout);
    r.nonlins = Fp * 2 * step_aux_nonlins(h);
    b.add(r);
    d = dout;
  }
  {
    LayerRow r;
    r.name = "bb.out";
    r.params = d + 1;
    r.units = Fp;
    r.macs_per_unit = d;
    r.adds = Fp;
    r.nonlins = Fp;  // sigmoid
    b.add(r);
  }
  return rep;
}

uint64_t FlopsReport::total_params() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.params;
  return s;
}
uint64_t FlopsReport::total_macs() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.macs;
  return s;
}
uint64_t FlopsReport::total_adds() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.adds;
  return s;
}
uint64_t FlopsReport::total_nonlins() const {
  uint64_t s = 0;
  for (const auto& r : rows) s += r.nonlins;
  return s;
}

double FlopsReport::frames_per_second() const {
  return static_cast<double>(cfg.stft.sample_rate) / cfg.stft.hop;
}

double FlopsReport::gflops_per_s(bool include_aux) const {
  double ops = 2.0 * static_cast<double>(total_macs());
  if (include_aux) ops += static_cast<double>(total_adds() + total_nonlins());
  return ops * frames_per_second() / 1e9;
}

OpCounter FlopsReport::per_frame_counter() const {
  OpCounter c;
  c.macs = total_macs();
  c.adds = total_adds();
  c.nonlins = total_nonlins();
  return c;
}

std::string FlopsReport::table() const {
  std::string s;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-18s %12s %14s %12s %12s\n", "layer", "params",
                "macs/frame", "adds/frame", "nonl/frame");
  s += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-18s %12llu %14llu %12llu %12llu\n",
                  r.name.c_str(), static_cast<unsigned long long>(r.params),
                  static_cast<unsigned long long>(r.macs),
                  static_cast<unsigned long long>(r.adds),
                  static_cast<unsigned long long>(r.nonlins));
    s += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-18s %12llu %14llu %12llu %12llu\n", "total",
                static_cast<unsigned long long>(total_params()),
                static_cast<unsigned long long>(total_macs()),
                static_cast<unsigned long long>(total_adds()),
                static_cast<unsigned long long>(total_nonlins()));
  s += buf;
  s += "bands: " + std::to_string(cfg.bands()) +
       "  frames/s: " + fmt_g(frames_per_second()) + "\n";
  s += "flops: " + fmt_g(gflops_per_s(false)) + " G/s (2*macs), " +
       fmt_g(gflops_per_s(true)) + " G/s including aux ops\n";
  s += "config_fp: " + format_fingerprint(cfg.fingerprint()) + "\n";
  return s;
}

std::string FlopsReport::tsv() const {
  std::string s;
  s += "#config_fp\t" + format_fingerprint(cfg.fingerprint()) + "\n";
  s += "#bands\t" + std::to_string(cfg.bands()) + "\n";
  s += "#frames_per_s\t" + fmt_g(frames_per_second()) + "\n";
  for (const auto& r : rows)
    s += "layer\t" + r.name + "\t" + fmt(r.params) + "\t" + fmt(r.macs) + "\t" +
         fmt(r.adds) + "\t" + fmt(r.nonlins) + "\t" + fmt(r.macs_const) + "\t" +
         fmt(r.macs_per_unit) + "\t" + fmt(r.units) + "\n";
  s += "total\t" + fmt(total_params()) + "\t" + fmt(total_macs()) + "\t" +
       fmt(total_adds()) + "\t" + fmt(total_nonlins()) + "\n";
  s += "gflops_per_s\t" + fmt_g(gflops_per_s(false)) + "\t" + fmt_g(gflops_per_s(true)) +
       "\n";
  return s;
}

double reduction_percent(const FlopsReport& base, const FlopsReport& other) {
  const double a = static_cast<double>(base.total_macs());
  const double b = static_cast<double>(other.total_macs());
  return 100.0 * (1.0 - b / a);
}

RtfResult bench_rtf(const PipelineConfig& cfg, const TensorMap& weights,
                    double seconds, uint64_t noise_seed) {
  if (seconds <= 0) throw ConfigError("benchmark duration must be positive");
  Engine engine(cfg, weights);
  Engine::Stream stream = engine.open_stream();
  stream.enable_timing(true);

  const int hop = cfg.stft.hop;
  const int M = cfg.channels;
  const int64_t total_samples =
      static_cast<int64_t>(seconds * cfg.stft.sample_rate);
  const int64_t pushes = total_samples / hop;

  std::vector<float> audio(static_cast<size_t>(pushes) * hop * M);
  SplitMix64 rng(noise_seed, "bench.audio");
  for (auto& v : audio) v = rng.next_uniform(0.1f);

  std::vector<float> logmel(engine.bands()), mask(engine.bands());

  const auto t0 = std::chrono::steady_clock::now();
  int64_t frames = 0;
  for (int64_t p = 0; p < pushes; p++) {
    if (stream.push(audio.data() + static_cast<size_t>(p) * hop * M, logmel.data(),
                    mask.data()))
      frames++;
  }
  const auto t1 = std::chrono::steady_clock::now();

  RtfResult r;
  r.audio_seconds = static_cast<double>(pushes) * hop / cfg.stft.sample_rate;
  r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.rtf = r.wall_seconds / r.audio_seconds;
  r.stages = stream.stage_seconds();
  r.frames = frames;
  r.macs = stream.net_counter().macs;
  return r;
}

}  // namespace melstream
