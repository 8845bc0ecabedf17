#include "amt/spectrogram.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "amt/fft.hpp"
#include "amt/threads.hpp"

namespace amt::dsp {

namespace {

/// Reflect indexing without repeating the edge sample.
int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

template <typename S>
nn::Tensor<S> stft_logmag(const AudioClip& clip, const StftConfig& cfg) {
  if (clip.sample_rate != cfg.sample_rate)
    throw std::invalid_argument("stft: expected " + std::to_string(cfg.sample_rate) +
                                " Hz input, got " + std::to_string(clip.sample_rate));
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  if (n == 0) throw std::invalid_argument("stft: empty clip");
  if (cfg.bins > cfg.n_fft / 2 + 1) throw std::invalid_argument("stft: bins exceed n_fft/2+1");

  const int frames = cfg.frames_for(n);
  const int nfft = cfg.n_fft;
  // periodic Hann
  std::vector<double> window(static_cast<size_t>(nfft));
  for (int i = 0; i < nfft; ++i)
    window[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / nfft));

  nn::Tensor<S> out({frames, cfg.bins});
  parallel_for(frames, [&](int64_t lo, int64_t hi) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
    for (int64_t t = lo; t < hi; ++t) {
      const int64_t center = t * cfg.hop;
      for (int i = 0; i < nfft; ++i) {
        const int64_t idx = reflect(center - nfft / 2 + i, n);
        buf[static_cast<size_t>(i)] = {static_cast<double>(clip.samples[static_cast<size_t>(idx)]) *
                                           window[static_cast<size_t>(i)],
                                       0.0};
      }
      fft_inplace(buf);
      S* row = out.data() + t * cfg.bins;
      for (int b = 0; b < cfg.bins; ++b)
        row[b] = static_cast<S>(std::log(std::abs(buf[static_cast<size_t>(b)]) + cfg.log_floor));
    }
  });
  return out;
}

double frame_time(int index, int total_frames, double hop_seconds) {
  if (index < 0 || index >= total_frames)
    throw std::out_of_range("frame_time: index " + std::to_string(index) + " outside [0, " +
                            std::to_string(total_frames) + ")");
  return index * hop_seconds;
}

template nn::Tensor<float> stft_logmag<float>(const AudioClip&, const StftConfig&);
template nn::Tensor<double> stft_logmag<double>(const AudioClip&, const StftConfig&);

}  // namespace amt::dsp
