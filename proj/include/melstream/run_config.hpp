// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Pipeline configuration: the STFT frontend, the STFT-to-Mel compression
// module (with its ablation variants), the four-module mask estimator, and
// the frequency scale the estimator runs on (Mel bands vs raw STFT bins).
// Configs round-trip through a plain-text `key = value` file; every output
// the tools emit embeds fingerprint() of the effective config.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "melstream/common.hpp"

namespace melstream {

enum class Scale { mel, linear };

enum class Variant {
  separate_fcb_tsb,   // dual magnitude/phase branches, conv blocks, time smoothing
  joint_fcb_tsb,      // single real+imag branch, conv blocks, time smoothing
  joint_fcb,          // single branch, conv blocks, no time smoothing
  joint_handcrafted,  // single branch, triangular filterbank right after the linear block
  joint_trainmel,     // single branch, per-band learnable filters on triangle supports
};

struct StftConfig {
  int fft_size = 512;
  int hop = 128;
  int sample_rate = 16000;
  int bins() const { return fft_size / 2 + 1; }
};

struct MelConfig {
  int n_mels = 80;
  float fmin = 0.f;
  float fmax = 8000.f;
};

struct Stft2MelConfig {
  Variant variant = Variant::separate_fcb_tsb;
  int embed_dim = 64;     // D
  int conv_blocks = 3;    // Q
  int freq_kernel = 3;
  int time_kernel = 6;
  int time_past_pad = 5;  // must equal time_kernel - 1
  bool comm_bidirectional = true;  // exchange in both branch directions
  bool comm_per_block = true;      // exchange after every conv block vs once at the end
};

struct BackboneConfig {
  // Hidden sizes of the four modules: full-band spatial (BiLSTM over bands),
  // narrow-band spatial (LSTM over time per band), sub-band spectral (LSTM
  // over time with band neighborhood), full-band spectral (BiLSTM over
  // bands with frame context). Defaults are calibrated against the
  // published parameter totals of the two reference configurations.
  std::array<int, 4> hidden = {128, 256, 352, 128};
  int module_out = 64;
  int n1 = 3, n2 = 3;  // band neighborhood of the sub-band module
  int context = 1;     // most recent frames fed to the full-band spectral module
  std::array<bool, 4> enable = {true, true, true, true};
};

struct PipelineConfig {
  Scale scale = Scale::mel;
  int channels = 6;
  int ref_channel = 5;  // 1-based microphone index
  StftConfig stft;
  MelConfig mel;
  Stft2MelConfig s2m;
  BackboneConfig backbone;
  float norm_decay = 0.999f;  // per-frame running-mean decay of input normalization

  int bands() const { return scale == Scale::mel ? mel.n_mels : stft.bins(); }
  // Per-(frame, band) feature width entering the mask estimator.
  int feature_dim() const { return scale == Scale::mel ? s2m.embed_dim : 2 * channels; }
  int ref_channel0() const { return ref_channel - 1; }

  void validate() const;               // throws ConfigError
  std::string canonical_text() const;  // fixed key order, locale-independent
  uint64_t fingerprint() const;
};

const char* to_string(Scale s);
const char* to_string(Variant v);
Scale scale_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

// Applies one `key = value` setting; unknown keys are rejected.
void apply_config_kv(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Parses a config file (`key = value` lines, `#` comments) on top of `base`.
PipelineConfig load_config_file(const std::string& path, PipelineConfig base = {});

// Applies "key=value" strings (CLI overrides) in order.
void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& kv);

// 16-bit chunks of the fingerprint, most significant first; each chunk is
// exactly representable in float32, which is how the fingerprint is embedded
// in tensor archives.
std::array<float, 4> fingerprint_chunks(uint64_t fp);
uint64_t fingerprint_from_chunks(const float* chunks);

std::string format_fingerprint(uint64_t fp);

}  // namespace melstream
