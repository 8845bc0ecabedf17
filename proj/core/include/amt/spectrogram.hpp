#pragma once

#include "amt/audio.hpp"
#include "amt/tensor.hpp"

namespace amt::dsp {

/// Analysis settings: 2048-sample Hann window, 320-sample hop (20 ms at
/// 16 kHz), magnitudes cropped to the first 1024 bins (Nyquist dropped so
/// three (1,2) poolings land on an integer bin count).
struct StftConfig {
  int sample_rate = 16000;
  int n_fft = 2048;
  int hop = 320;
  int bins = 1024;
  double log_floor = 1e-5;

  double hop_seconds() const {
    return static_cast<double>(hop) / static_cast<double>(sample_rate);
  }
  int frames_for(int64_t n_samples) const {
    return static_cast<int>((n_samples + hop - 1) / hop);
  }
};

/// Log-magnitude spectrogram, log(|X| + log_floor), shape (T_spec, bins).
/// Frames are centered via reflect padding, so a clip of N samples yields
/// ceil(N / hop) frames. Throws on a sample-rate mismatch or empty input.
template <typename S>
nn::Tensor<S> stft_logmag(const AudioClip& clip, const StftConfig& cfg = {});

/// Center time of a frame in seconds; index must lie in [0, total_frames).
double frame_time(int index, int total_frames, double hop_seconds = 0.020);

}  // namespace amt::dsp
