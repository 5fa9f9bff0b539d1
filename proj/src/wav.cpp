// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "melstream/common.hpp"

namespace melstream {

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xfffe;

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ofstream& out, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}

void write_header(std::ofstream& out, const WavData& wav, uint16_t format,
                  int bytes_per_sample, size_t data_bytes) {
  out.write("RIFF", 4);
  wr_u32(out, static_cast<uint32_t>(36 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, format);
  wr_u16(out, static_cast<uint16_t>(wav.channels));
  wr_u32(out, static_cast<uint32_t>(wav.sample_rate));
  wr_u32(out, static_cast<uint32_t>(wav.sample_rate * wav.channels * bytes_per_sample));
  wr_u16(out, static_cast<uint16_t>(wav.channels * bytes_per_sample));
  wr_u16(out, static_cast<uint16_t>(8 * bytes_per_sample));
  out.write("data", 4);
  wr_u32(out, static_cast<uint32_t>(data_bytes));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);

  uint8_t hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12))
    throw ParseError(path + ": truncated RIFF header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw ParseError(path + ": not a RIFF/WAVE file");

  WavData wav;
  uint16_t format = 0, bits = 0;
  bool got_fmt = false;
  while (true) {
    uint8_t chdr[8];
    if (!in.read(reinterpret_cast<char*>(chdr), 8)) {
      if (got_fmt && !wav.samples.empty()) break;
      throw ParseError(path + ": missing " + (got_fmt ? "data" : "fmt") + " chunk");
    }
    const uint32_t size = rd_u32(chdr + 4);
    if (std::memcmp(chdr, "fmt ", 4) == 0) {
      std::vector<uint8_t> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
        throw ParseError(path + ": truncated fmt chunk");
      if (size < 16) throw ParseError(path + ": fmt chunk too small");
      format = rd_u16(fmt.data());
      wav.channels = rd_u16(fmt.data() + 2);
      wav.sample_rate = static_cast<int>(rd_u32(fmt.data() + 4));
      bits = rd_u16(fmt.data() + 14);
      if (format == kFormatExtensible && size >= 40) format = rd_u16(fmt.data() + 24);
      got_fmt = true;
    } else if (std::memcmp(chdr, "data", 4) == 0) {
      if (!got_fmt) throw ParseError(path + ": data chunk before fmt chunk");
      if (wav.channels < 1) throw ParseError(path + ": invalid channel count");
      std::vector<uint8_t> raw(size);
      if (!in.read(reinterpret_cast<char*>(raw.data()), size))
        throw ParseError(path + ": truncated data chunk");
      if (format == kFormatPcm && bits == 16) {
        const size_t n = size / 2;
        wav.samples.resize(n);
        for (size_t i = 0; i < n; i++) {
          const int16_t s = static_cast<int16_t>(rd_u16(raw.data() + 2 * i));
          wav.samples[i] = static_cast<float>(s) / 32768.f;
        }
      } else if (format == kFormatFloat && bits == 32) {
        const size_t n = size / 4;
        wav.samples.resize(n);
        std::memcpy(wav.samples.data(), raw.data(), n * 4);
      } else {
        throw ParseError(path + ": unsupported format (tag " + std::to_string(format) +
                         ", " + std::to_string(bits) + " bits); expected PCM16 or float32");
      }
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // skip, chunks are 2-byte aligned
      if (!in) throw ParseError(path + ": truncated chunk");
    }
  }
  if (!got_fmt) throw ParseError(path + ": missing fmt chunk");
  return wav;
}

void write_wav_f32(const std::string& path, const WavData& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create wav file: " + path);
  write_header(out, wav, kFormatFloat, 4, wav.samples.size() * 4);
  out.write(reinterpret_cast<const char*>(wav.samples.data()), wav.samples.size() * 4);
  if (!out) throw IoError("failed writing wav file: " + path);
}

void write_wav_pcm16(const std::string& path, const WavData& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create wav file: " + path);
  write_header(out, wav, kFormatPcm, 2, wav.samples.size() * 2);
  for (float v : wav.samples) {
    const float c = std::clamp(v, -1.f, 1.f);
    const int16_t s = static_cast<int16_t>(std::lrintf(c * 32767.f));
    wr_u16(out, static_cast<uint16_t>(s));
  }
  if (!out) throw IoError("failed writing wav file: " + path);
}

}  // namespace melstream
