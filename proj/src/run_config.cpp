// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/run_config.hpp"

#include <cstdio>
#include <fstream>

#include "melstream/rng.hpp"

namespace melstream {

namespace {

std::string fmt_float(float v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

float parse_float(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    float r = std::stof(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

}  // namespace

const char* to_string(Scale s) { return s == Scale::mel ? "mel" : "linear"; }

const char* to_string(Variant v) {
  switch (v) {
    case Variant::separate_fcb_tsb: return "separate-fcb-tsb";
    case Variant::joint_fcb_tsb: return "joint-fcb-tsb";
    case Variant::joint_fcb: return "joint-fcb";
    case Variant::joint_handcrafted: return "joint-handcrafted";
    case Variant::joint_trainmel: return "joint-trainmel";
  }
  return "?";
}

Scale scale_from_string(const std::string& s) {
  if (s == "mel") return Scale::mel;
  if (s == "linear") return Scale::linear;
  throw ConfigError("unknown scale: '" + s + "' (expected mel or linear)");
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::separate_fcb_tsb, Variant::joint_fcb_tsb, Variant::joint_fcb,
                    Variant::joint_handcrafted, Variant::joint_trainmel})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown variant: '" + s + "'");
}

void PipelineConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (ref_channel < 1 || ref_channel > channels)
    throw ConfigError("ref_channel " + std::to_string(ref_channel) +
                      " out of range for " + std::to_string(channels) + " channels");
  if (stft.fft_size < 8 || (stft.fft_size & (stft.fft_size - 1)) != 0)
    throw ConfigError("fft_size must be a power of two >= 8");
  if (stft.hop < 1 || stft.hop > stft.fft_size)
    throw ConfigError("hop must be in [1, fft_size]");
  if (stft.sample_rate < 1) throw ConfigError("sample_rate must be positive");
  if (mel.n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if (mel.fmax <= mel.fmin) throw ConfigError("fmax must exceed fmin");
  if (mel.fmax > static_cast<float>(stft.sample_rate) / 2.f + 1e-3f)
    throw ConfigError("fmax must not exceed the Nyquist frequency");
  if (s2m.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (s2m.conv_blocks < 1) throw ConfigError("conv_blocks must be >= 1");
  if (s2m.freq_kernel < 1 || s2m.freq_kernel % 2 == 0)
    throw ConfigError("freq_kernel must be odd");
  if (s2m.time_kernel < 1) throw ConfigError("time_kernel must be >= 1");
  if (s2m.time_past_pad != s2m.time_kernel - 1)
    throw ConfigError("time_past_pad must equal time_kernel - 1");
  for (int h : backbone.hidden)
    if (h < 1) throw ConfigError("backbone hidden sizes must be >= 1");
  if (backbone.module_out < 1) throw ConfigError("module_out must be >= 1");
  if (backbone.n1 < 0 || backbone.n2 < 0) throw ConfigError("n1/n2 must be >= 0");
  if (backbone.context < 1) throw ConfigError("context must be >= 1");
  if (norm_decay <= 0.f || norm_decay >= 1.f)
    throw ConfigError("norm_decay must be in (0, 1)");
}

std::string PipelineConfig::canonical_text() const {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  kv("scale", to_string(scale));
  kv("channels", std::to_string(channels));
  kv("ref_channel", std::to_string(ref_channel));
  kv("fft_size", std::to_string(stft.fft_size));
  kv("hop", std::to_string(stft.hop));
  kv("sample_rate", std::to_string(stft.sample_rate));
  kv("n_mels", std::to_string(mel.n_mels));
  kv("fmin", fmt_float(mel.fmin));
  kv("fmax", fmt_float(mel.fmax));
  kv("variant", to_string(s2m.variant));
  kv("embed_dim", std::to_string(s2m.embed_dim));
  kv("conv_blocks", std::to_string(s2m.conv_blocks));
  kv("freq_kernel", std::to_string(s2m.freq_kernel));
  kv("time_kernel", std::to_string(s2m.time_kernel));
  kv("time_past_pad", std::to_string(s2m.time_past_pad));
  kv("comm_bidirectional", s2m.comm_bidirectional ? "true" : "false");
  kv("comm_per_block", s2m.comm_per_block ? "true" : "false");
  for (int i = 0; i < 4; i++)
    kv("hidden" + std::to_string(i + 1), std::to_string(backbone.hidden[i]));
  kv("module_out", std::to_string(backbone.module_out));
  kv("n1", std::to_string(backbone.n1));
  kv("n2", std::to_string(backbone.n2));
  kv("context", std::to_string(backbone.context));
  for (int i = 0; i < 4; i++)
    kv("enable_m" + std::to_string(i + 1), backbone.enable[i] ? "true" : "false");
  kv("norm_decay", fmt_float(norm_decay));
  return s;
}

uint64_t PipelineConfig::fingerprint() const { return fnv1a64(canonical_text()); }

void apply_config_kv(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "scale") cfg.scale = scale_from_string(value);
  else if (key == "channels") cfg.channels = parse_int(key, value);
  else if (key == "ref_channel") cfg.ref_channel = parse_int(key, value);
  else if (key == "fft_size") cfg.stft.fft_size = parse_int(key, value);
  else if (key == "hop") cfg.stft.hop = parse_int(key, value);
  else if (key == "sample_rate") cfg.stft.sample_rate = parse_int(key, value);
  else if (key == "n_mels") cfg.mel.n_mels = parse_int(key, value);
  else if (key == "fmin") cfg.mel.fmin = parse_float(key, value);
  else if (key == "fmax") cfg.mel.fmax = parse_float(key, value);
  else if (key == "variant") cfg.s2m.variant = variant_from_string(value);
  else if (key == "embed_dim") cfg.s2m.embed_dim = parse_int(key, value);
  else if (key == "conv_blocks") cfg.s2m.conv_blocks = parse_int(key, value);
  else if (key == "freq_kernel") cfg.s2m.freq_kernel = parse_int(key, value);
  else if (key == "time_kernel") cfg.s2m.time_kernel = parse_int(key, value);
  else if (key == "time_past_pad") cfg.s2m.time_past_pad = parse_int(key, value);
  else if (key == "comm_bidirectional") cfg.s2m.comm_bidirectional = parse_bool(key, value);
  else if (key == "comm_per_block") cfg.s2m.comm_per_block = parse_bool(key, value);
  else if (key == "hidden1") cfg.backbone.hidden[0] = parse_int(key, value);
  else if (key == "hidden2") cfg.backbone.hidden[1] = parse_int(key, value);
  else if (key == "hidden3") cfg.backbone.hidden[2] = parse_int(key, value);
  else if (key == "hidden4") cfg.backbone.hidden[3] = parse_int(key, value);
  else if (key == "module_out") cfg.backbone.module_out = parse_int(key, value);
  else if (key == "n1") cfg.backbone.n1 = parse_int(key, value);
  else if (key == "n2") cfg.backbone.n2 = parse_int(key, value);
  else if (key == "context") cfg.backbone.context = parse_int(key, value);
  else if (key == "enable_m1") cfg.backbone.enable[0] = parse_bool(key, value);
  else if (key == "enable_m2") cfg.backbone.enable[1] = parse_bool(key, value);
  else if (key == "enable_m3") cfg.backbone.enable[2] = parse_bool(key, value);
  else if (key == "enable_m4") cfg.backbone.enable[3] = parse_bool(key, value);
  else if (key == "norm_decay") cfg.norm_decay = parse_float(key, value);
  else throw ConfigError("unknown config key: '" + key + "'");
}

PipelineConfig load_config_file(const std::string& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty key or value");
    apply_config_kv(base, key, value);
  }
  return base;
}

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& kv) {
  for (const std::string& s : kv) {
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value, got '" + s + "'");
    apply_config_kv(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

std::array<float, 4> fingerprint_chunks(uint64_t fp) {
  return {static_cast<float>((fp >> 48) & 0xffff), static_cast<float>((fp >> 32) & 0xffff),
          static_cast<float>((fp >> 16) & 0xffff), static_cast<float>(fp & 0xffff)};
}

uint64_t fingerprint_from_chunks(const float* chunks) {
  uint64_t fp = 0;
  for (int i = 0; i < 4; i++)
    fp = (fp << 16) | (static_cast<uint64_t>(chunks[i]) & 0xffff);
  return fp;
}

std::string format_fingerprint(uint64_t fp) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace melstream
