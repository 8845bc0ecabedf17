#pragma once

#include <string>
#include <vector>

namespace amt {

/// Mono waveform in [-1, 1]. Everything downstream assumes 16 kHz.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;

  double seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

inline constexpr int kSampleRate = 16000;

/// RIFF/WAVE PCM 16-bit mono reader. Throws on any other layout or rate.
AudioClip read_wav(const std::string& path, int expected_rate = kSampleRate);
void write_wav(const std::string& path, const AudioClip& clip);

/// Headerless 32-bit float samples, used for test fixtures.
AudioClip read_raw_f32(const std::string& path, int sample_rate = kSampleRate);
void write_raw_f32(const std::string& path, const AudioClip& clip);

}  // namespace amt
