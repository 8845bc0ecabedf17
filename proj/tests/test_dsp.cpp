#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "amt/audio.hpp"
#include "amt/fft.hpp"
#include "amt/rng.hpp"
#include "amt/spectrogram.hpp"

using namespace amt;
using namespace amt::dsp;

namespace {

AudioClip tone(double hz, double amp, double seconds) {
  AudioClip clip;
  clip.sample_rate = kSampleRate;
  const size_t n = static_cast<size_t>(seconds * kSampleRate);
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    clip.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * hz * i / kSampleRate));
  return clip;
}

/// Direct DFT magnitude of one windowed frame: the quadratic-time oracle the
/// fast transform is checked against.
std::vector<double> dft_frame_oracle(const AudioClip& clip, int frame, const StftConfig& cfg) {
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  auto reflect = [&](int64_t i) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
  };
  std::vector<double> windowed(cfg.n_fft);
  const int64_t center = static_cast<int64_t>(frame) * cfg.hop;
  for (int i = 0; i < cfg.n_fft; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / cfg.n_fft));
    windowed[i] = clip.samples[reflect(center - cfg.n_fft / 2 + i)] * w;
  }
  std::vector<double> mags(cfg.bins);
  for (int b = 0; b < cfg.bins; ++b) {
    double re = 0, im = 0;
    for (int i = 0; i < cfg.n_fft; ++i) {
      const double ang = -2.0 * M_PI * b * i / cfg.n_fft;
      re += windowed[i] * std::cos(ang);
      im += windowed[i] * std::sin(ang);
    }
    mags[b] = std::hypot(re, im);
  }
  return mags;
}

}  // namespace

TEST_CASE("fft matches the direct dft") {
  std::vector<std::complex<double>> a(64);
  Rng rng(5);
  for (auto& v : a) v = std::complex<double>(rng.normal(), rng.normal());
  const std::vector<std::complex<double>> input = a;
  fft_inplace(a);
  for (int k = 0; k < 64; k += 7) {
    std::complex<double> want{0, 0};
    for (int i = 0; i < 64; ++i)
      want += input[i] * std::polar(1.0, -2.0 * M_PI * k * i / 64.0);
    CHECK(std::abs(a[k] - want) < 1e-9);
  }
}

TEST_CASE("silence maps every cell to the log floor") {
  AudioClip clip;
  clip.samples.assign(96000, 0.0f);
  const auto spec = stft_logmag<double>(clip);
  for (int64_t i = 0; i < spec.size(); ++i) CHECK(spec[i] == doctest::Approx(std::log(1e-5)));
}

TEST_CASE("six seconds yields the (300, 1024) contract") {
  const auto spec = stft_logmag<float>(tone(440.0, 0.5, 6.0));
  REQUIRE(spec.rank() == 2);
  CHECK(spec.dim(0) == 300);
  CHECK(spec.dim(1) == 1024);
}

TEST_CASE("440 Hz tone peaks in bin 56 in every frame, against the dft oracle") {
  const AudioClip clip = tone(440.0, 0.5, 6.0);
  const StftConfig cfg;
  const auto spec = stft_logmag<double>(clip, cfg);
  const int expected_bin = static_cast<int>(std::lround(440.0 * 2048 / 16000.0));
  CHECK(expected_bin == 56);
  // frames whose window never touches the reflect-padded boundary
  const int64_t interior_lo = cfg.n_fft / 2 / cfg.hop + 1;
  const int64_t interior_hi = (96000 - cfg.n_fft / 2) / cfg.hop;
  for (int64_t t = 0; t < spec.dim(0); ++t) {
    int64_t best = 0;
    for (int64_t b = 1; b < spec.dim(1); ++b)
      if (spec.at(t, b) > spec.at(t, best)) best = b;
    if (t >= interior_lo && t <= interior_hi)
      CHECK(best == expected_bin);
    else
      CHECK(std::abs(best - expected_bin) <= 1);
  }
  // spot-check magnitudes against the direct transform
  for (int frame : {0, 150, 299}) {
    const auto oracle = dft_frame_oracle(clip, frame, cfg);
    for (int b : {0, 55, 56, 57, 500}) {
      const double want = std::log(oracle[b] + cfg.log_floor);
      CHECK(spec.at(frame, b) == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("spectral energy scales quadratically with amplitude") {
  const StftConfig cfg;
  const auto s1 = stft_logmag<double>(tone(440.0, 0.1, 6.0), cfg);
  const auto s2 = stft_logmag<double>(tone(440.0, 0.2, 6.0), cfg);
  double e1 = 0, e2 = 0;
  for (int64_t i = 0; i < s1.size(); ++i) {
    const double m1 = std::exp(s1[i]) - cfg.log_floor;
    const double m2 = std::exp(s2[i]) - cfg.log_floor;
    e1 += m1 * m1;
    e2 += m2 * m2;
  }
  CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("a one-hop shift moves frames by one index") {
  AudioClip base = tone(523.25, 0.4, 6.02);
  AudioClip shifted;
  shifted.sample_rate = kSampleRate;
  shifted.samples.assign(base.samples.begin() + 320, base.samples.begin() + 320 + 96000);
  base.samples.resize(96000);
  const auto s0 = stft_logmag<double>(base);
  const auto s1 = stft_logmag<double>(shifted);
  for (int64_t t = 8; t + 8 < 300; ++t)
    for (int64_t b = 0; b < 1024; b += 13)
      CHECK(s1.at(t, b) == doctest::Approx(s0.at(t + 1, b)).epsilon(1e-4));
}

TEST_CASE("frame_time") {
  CHECK(frame_time(0, 300) == doctest::Approx(0.0));
  CHECK(frame_time(50, 300) == doctest::Approx(1.0));
  CHECK(frame_time(299, 300) == doctest::Approx(5.98));
  CHECK_THROWS_AS(frame_time(300, 300), std::out_of_range);
  CHECK_THROWS_AS(frame_time(-1, 300), std::out_of_range);
}

TEST_CASE("stft input contracts") {
  AudioClip wrong_rate = tone(440.0, 0.5, 1.0);
  wrong_rate.sample_rate = 44100;
  CHECK_THROWS_AS(stft_logmag<float>(wrong_rate), std::invalid_argument);
  AudioClip empty;
  CHECK_THROWS_AS(stft_logmag<float>(empty), std::invalid_argument);
}

TEST_CASE("wav round trip at 16-bit resolution") {
  const AudioClip clip = tone(330.0, 0.7, 0.25);
  write_wav("/tmp/amt_test.wav", clip);
  const AudioClip back = read_wav("/tmp/amt_test.wav");
  REQUIRE(back.samples.size() == clip.samples.size());
  CHECK(back.sample_rate == kSampleRate);
  for (size_t i = 0; i < clip.samples.size(); i += 17)
    CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-3));
  // quantization is stable: a second round trip is bit-identical
  write_wav("/tmp/amt_test2.wav", back);
  const AudioClip back2 = read_wav("/tmp/amt_test2.wav");
  CHECK(back2.samples == back.samples);
}

TEST_CASE("raw f32 round trip is lossless") {
  const AudioClip clip = tone(330.0, 0.7, 0.1);
  write_raw_f32("/tmp/amt_test.f32", clip);
  const AudioClip back = read_raw_f32("/tmp/amt_test.f32");
  CHECK(back.samples == clip.samples);
}

TEST_CASE("wav reader rejects a mismatched rate") {
  AudioClip clip = tone(330.0, 0.7, 0.1);
  clip.sample_rate = 8000;
  write_wav("/tmp/amt_test_8k.wav", clip);
  CHECK_THROWS(read_wav("/tmp/amt_test_8k.wav"));
}
