// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// melstream CLI: batch enhancement, mask-target extraction, complexity
// reports, benchmarking and weight-archive utilities.
//
// Exit codes: 0 ok, 2 usage, 3 I/O or file parsing, 4 validation/config.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "melstream/archive.hpp"
#include "melstream/dsp.hpp"
#include "melstream/engine.hpp"
#include "melstream/flops.hpp"
#include "melstream/run_config.hpp"
#include "melstream/simd.hpp"
#include "melstream/wav.hpp"

using namespace melstream;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string simd = "auto";
};

PipelineConfig make_config(const CommonOpts& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) cfg = load_config_file(c.config_path);
  apply_overrides(cfg, c.sets);
  cfg.validate();
  return cfg;
}

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

void write_csv(const std::string& path, const Tensor& t, const std::string& what,
               uint64_t fp) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path);
  out << "# melstream " << what << "\n";
  out << "# config_fp=" << format_fingerprint(fp) << "\n";
  const int64_t rows = t.rank() == 2 ? t.dim(0) : 1;
  const int64_t cols = t.rank() == 2 ? t.dim(1) : t.numel();
  char buf[48];
  for (int64_t r = 0; r < rows; r++) {
    std::string line;
    for (int64_t c = 0; c < cols; c++) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(t[r * cols + c]));
      if (c) line += ',';
      line += buf;
    }
    out << line << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_tensor_output(const std::string& path, const TensorMap& tensors,
                         const std::string& csv_key, const std::string& what,
                         uint64_t fp) {
  if (ends_with(path, ".csv")) {
    write_csv(path, tensors.at(csv_key), what, fp);
  } else {
    TensorMap with_meta = tensors;
    Tensor meta({4});
    const auto chunks = fingerprint_chunks(fp);
    for (int i = 0; i < 4; i++) meta[i] = chunks[i];
    with_meta.emplace("meta.config_fp", std::move(meta));
    save_archive(with_meta, path);
  }
}

int cmd_enhance(const CommonOpts& common, const std::string& in_path,
                const std::string& weights_path, const std::string& out_logmel,
                const std::string& out_mask, const std::string& out_wav,
                int ref_ch, bool streaming) {
  PipelineConfig cfg = make_config(common);
  const WavData wav = read_wav(in_path);
  if (wav.sample_rate != cfg.stft.sample_rate)
    throw ValidationError(in_path + ": sample rate " + std::to_string(wav.sample_rate) +
                          " does not match configured " +
                          std::to_string(cfg.stft.sample_rate));
  cfg.channels = wav.channels;
  if (ref_ch > 0) cfg.ref_channel = ref_ch;
  cfg.validate();

  const TensorMap weights = load_archive(weights_path);
  Engine engine(cfg, weights);

  Tensor logmel, mask;
  std::vector<float> recon;
  if (streaming) {
    Engine::Stream stream = engine.open_stream();
    const int hop = cfg.stft.hop;
    const int64_t pushes = wav.frames() / hop;
    const int bands = engine.bands();
    std::vector<float> lrow(bands), mrow(bands);
    std::vector<std::vector<float>> lrows, mrows;
    for (int64_t p = 0; p < pushes; p++) {
      if (stream.push(wav.samples.data() + static_cast<size_t>(p) * hop * cfg.channels,
                      lrow.data(), mrow.data())) {
        lrows.push_back(lrow);
        mrows.push_back(mrow);
      }
    }
    if (lrows.empty()) throw Error("input too short to produce any frame");
    logmel = Tensor({static_cast<int64_t>(lrows.size()), bands});
    mask = Tensor({static_cast<int64_t>(mrows.size()), bands});
    for (size_t t = 0; t < lrows.size(); t++)
      for (int b = 0; b < bands; b++) {
        logmel.at2(t, b) = lrows[t][b];
        mask.at2(t, b) = mrows[t][b];
      }
    if (!out_wav.empty())
      throw ConfigError("--out-wav requires --offline (reconstruction is a batch path)");
  } else {
    Engine::Result res = engine.offline(wav.samples.data(), wav.frames(), wav.channels,
                                        !out_wav.empty());
    logmel = std::move(res.logmel);
    mask = std::move(res.mask);
    recon = std::move(res.wave);
  }

  const uint64_t fp = cfg.fingerprint();
  if (!out_logmel.empty()) {
    TensorMap t;
    t.emplace("logmel", logmel);
    t.emplace("mask", mask);
    write_tensor_output(out_logmel, t, "logmel", "logmel", fp);
  }
  if (!out_mask.empty()) {
    TensorMap t;
    t.emplace("mask", mask);
    write_tensor_output(out_mask, t, "mask", "mask", fp);
  }
  if (!out_wav.empty()) {
    WavData w;
    w.sample_rate = cfg.stft.sample_rate;
    w.channels = 1;
    w.samples = std::move(recon);
    write_wav_f32(out_wav, w);
  }
  std::printf("enhanced %lld frames (%s path), config_fp=%s\n",
              static_cast<long long>(logmel.dim(0)), streaming ? "streaming" : "offline",
              format_fingerprint(fp).c_str());
  return 0;
}

int cmd_target(const CommonOpts& common, const std::string& clean_path,
               const std::string& noisy_path, const std::string& out_path) {
  PipelineConfig cfg = make_config(common);
  const WavData clean = read_wav(clean_path);
  const WavData noisy = read_wav(noisy_path);
  if (clean.sample_rate != noisy.sample_rate || clean.channels != noisy.channels ||
      clean.frames() != noisy.frames())
    throw ValidationError("clean and noisy recordings must match in rate, channels and length");
  cfg.channels = clean.channels;
  cfg.validate();

  const dsp::Stft stft(cfg.stft);
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank(cfg.stft, cfg.mel);
  const int ref = cfg.ref_channel0();
  const dsp::Spectrogram cs = stft.forward(clean.samples.data(), clean.frames(), clean.channels);
  const dsp::Spectrogram ns = stft.forward(noisy.samples.data(), noisy.frames(), noisy.channels);
  const Tensor cp = dsp::mel_power(cs, fb, ref);
  const Tensor np = dsp::mel_power(ns, fb, ref);
  const Tensor mask = dsp::mel_prm(cp, np);

  TensorMap t;
  t.emplace("target.mel_prm", mask);
  write_tensor_output(out_path, t, "target.mel_prm", "mel-prm target", cfg.fingerprint());
  std::printf("wrote %lld-frame mask target to %s\n",
              static_cast<long long>(mask.dim(0)), out_path.c_str());
  return 0;
}

int cmd_flops(const CommonOpts& common, const std::string& compare_path,
              const std::string& out_path) {
  const PipelineConfig cfg = make_config(common);
  const FlopsReport a = count_flops(cfg);
  std::fputs(a.table().c_str(), stdout);
  std::string tsv = a.tsv();
  if (!compare_path.empty()) {
    PipelineConfig cfg_b = load_config_file(compare_path);
    apply_overrides(cfg_b, common.sets);
    const FlopsReport b = count_flops(cfg_b);
    std::printf("\n");
    std::fputs(b.table().c_str(), stdout);
    const double red = reduction_percent(a, b);
    std::printf("\nmac reduction: %.2f%% (%llu -> %llu macs/frame)\n", red,
                static_cast<unsigned long long>(a.total_macs()),
                static_cast<unsigned long long>(b.total_macs()));
    tsv += b.tsv();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "reduction_pct\t%.4f\n", red);
    tsv += buf;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot create " + out_path);
    out << tsv;
  }
  return 0;
}

int cmd_bench(const CommonOpts& common, double seconds, const std::string& weights_path,
              uint64_t seed) {
  const PipelineConfig cfg = make_config(common);
  const TensorMap weights =
      weights_path.empty() ? random_init(cfg, seed) : load_archive(weights_path);
  const RtfResult r = bench_rtf(cfg, weights, seconds);
  std::printf("audio: %.2f s, wall: %.3f s, rtf: %.4f\n", r.audio_seconds,
              r.wall_seconds, r.rtf);
  std::printf("stages: frontend %.3f s, compress %.3f s, estimator %.3f s\n",
              r.stages.frontend, r.stages.compress, r.stages.backbone);
  std::printf("frames: %lld, network macs: %llu, simd: %s\n",
              static_cast<long long>(r.frames), static_cast<unsigned long long>(r.macs),
              simd::ops().name);
  return 0;
}

int cmd_init_weights(const CommonOpts& common, uint64_t seed, const std::string& out_path) {
  const PipelineConfig cfg = make_config(common);
  save_archive(random_init(cfg, seed), out_path);
  std::printf("wrote weights for config_fp=%s to %s\n",
              format_fingerprint(cfg.fingerprint()).c_str(), out_path.c_str());
  return 0;
}

int cmd_dump_filterbank(const CommonOpts& common, const std::string& out_path) {
  const PipelineConfig cfg = make_config(common);
  const dsp::MelFilterbank fb = dsp::build_mel_filterbank(cfg.stft, cfg.mel);
  Tensor t({fb.n_mels, fb.n_bins});
  for (int m = 0; m < fb.n_mels; m++)
    for (int f = 0; f < fb.n_bins; f++) t.at2(m, f) = fb.at(m, f);
  write_csv(out_path, t, "mel filterbank", cfg.fingerprint());
  std::printf("wrote %dx%d filterbank to %s\n", fb.n_mels, fb.n_bins, out_path.c_str());
  return 0;
}

int cmd_dump_manifest(const CommonOpts& common) {
  const PipelineConfig cfg = make_config(common);
  uint64_t params = 0;
  for (const TensorSpec& s : build_manifest(cfg)) {
    std::string dims;
    for (size_t i = 0; i < s.dims.size(); i++)
      dims += (i ? "x" : "") + std::to_string(s.dims[i]);
    std::printf("%-24s %s\n", s.name.c_str(), dims.c_str());
    if (s.name != "meta.config_fp") params += static_cast<uint64_t>(s.numel());
  }
  std::printf("total parameters: %llu\n", static_cast<unsigned long long>(params));
  std::printf("config_fp: %s\n", format_fingerprint(cfg.fingerprint()).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melstream: streaming Mel-domain multichannel speech enhancement"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path, "config file (key = value lines)");
  app.add_option("--set", common.sets, "config override key=value (repeatable)");
  app.add_option("--simd", common.simd, "simd lane: auto|scalar|avx2|avx512|neon");

  std::string in_path, weights_path, out_logmel, out_mask, out_wav;
  int ref_ch = 0;
  bool streaming = false, offline = false;
  auto* enh = app.add_subcommand("enhance", "enhance a multichannel wav file");
  enh->add_option("--in", in_path, "input wav")->required();
  enh->add_option("--weights", weights_path, "weights archive")->required();
  enh->add_option("--out-logmel", out_logmel, "output logmel (+mask) archive or .csv");
  enh->add_option("--out-mask", out_mask, "output mask archive or .csv");
  enh->add_option("--out-wav", out_wav, "crude reconstruction wav (offline only)");
  enh->add_option("--ref-ch", ref_ch, "reference microphone, 1-based");
  enh->add_flag("--streaming", streaming, "frame-by-frame path");
  enh->add_flag("--offline", offline, "batch path (default)");

  std::string clean_path, noisy_path, target_out;
  auto* tgt = app.add_subcommand("target", "compute the rectified mask target");
  tgt->add_option("--clean", clean_path)->required();
  tgt->add_option("--noisy", noisy_path)->required();
  tgt->add_option("--out", target_out)->required();

  std::string compare_path, flops_out;
  auto* flp = app.add_subcommand("flops", "analytic complexity report");
  flp->add_option("--compare-config", compare_path, "second config to compare against");
  flp->add_option("--out", flops_out, "write tab-separated report");

  double bench_seconds = 30.0;
  std::string bench_weights;
  uint64_t bench_seed = 1;
  auto* ben = app.add_subcommand("bench", "real-time-factor benchmark (streaming path)");
  ben->add_option("--seconds", bench_seconds, "audio duration to stream");
  ben->add_option("--weights", bench_weights, "weights archive (random if omitted)");
  ben->add_option("--seed", bench_seed, "weight seed when --weights is omitted");

  uint64_t init_seed = 0;
  std::string init_out;
  auto* ini = app.add_subcommand("init-weights", "write seeded random weights");
  ini->add_option("--seed", init_seed)->required();
  ini->add_option("--out", init_out)->required();

  std::string fb_out;
  auto* dfb = app.add_subcommand("dump-filterbank", "write the filterbank as csv");
  dfb->add_option("--out", fb_out)->required();

  auto* dmf = app.add_subcommand("dump-manifest", "list expected weight tensors");

  CLI11_PARSE(app, argc, argv);

  try {
    simd::set_lane(simd::lane_from_name(common.simd));
    if (enh->parsed()) {
      if (streaming && offline) throw ConfigError("choose one of --streaming/--offline");
      return cmd_enhance(common, in_path, weights_path, out_logmel, out_mask, out_wav,
                         ref_ch, streaming);
    }
    if (tgt->parsed()) return cmd_target(common, clean_path, noisy_path, target_out);
    if (flp->parsed()) return cmd_flops(common, compare_path, flops_out);
    if (ben->parsed()) return cmd_bench(common, bench_seconds, bench_weights, bench_seed);
    if (ini->parsed()) return cmd_init_weights(common, init_seed, init_out);
    if (dfb->parsed()) return cmd_dump_filterbank(common, fb_out);
    if (dmf->parsed()) return cmd_dump_manifest(common);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
