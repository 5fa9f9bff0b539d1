// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melstream {

// Interleaved float samples in [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<float> samples;
  int64_t frames() const {
    return channels ? static_cast<int64_t>(samples.size()) / channels : 0;
  }
};

// Reads RIFF/WAVE, PCM16 or IEEE float32, any channel count. Unknown chunks
// are skipped; malformed files raise ParseError, unreadable ones IoError.
WavData read_wav(const std::string& path);

void write_wav_f32(const std::string& path, const WavData& wav);
void write_wav_pcm16(const std::string& path, const WavData& wav);

}  // namespace melstream
