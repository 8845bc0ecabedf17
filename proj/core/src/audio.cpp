#include "amt/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace amt {

namespace {

void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("audio: " + path + ": " + why);
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

AudioClip read_wav(const std::string& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) fail(path, "not a RIFF file");
  read_pod<uint32_t>(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) fail(path, "not a WAVE file");

  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<char> data;
  bool got_fmt = false, got_data = false;
  while (in.read(tag, 4)) {
    const uint32_t size = read_pod<uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = read_pod<uint16_t>(in);
      channels = read_pod<uint16_t>(in);
      rate = read_pod<uint32_t>(in);
      read_pod<uint32_t>(in);  // byte rate
      read_pod<uint16_t>(in);  // block align
      bits = read_pod<uint16_t>(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      if (format != 1) fail(path, "only PCM supported");
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      got_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!got_fmt || !got_data) fail(path, "missing fmt or data chunk");
  if (channels != 1) fail(path, "expected mono");
  if (bits != 16) fail(path, "expected 16-bit PCM");
  if (expected_rate > 0 && static_cast<int>(rate) != expected_rate)
    fail(path, "expected " + std::to_string(expected_rate) + " Hz, got " + std::to_string(rate));

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  const size_t n = data.size() / 2;
  clip.samples.resize(n);
  const int16_t* pcm = reinterpret_cast<const int16_t*>(data.data());
  for (size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(pcm[i]) / 32768.0f;
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_size = n * 2;
  const uint32_t rate = static_cast<uint32_t>(clip.sample_rate);
  auto pod = [&out](auto v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write("RIFF", 4);
  pod(uint32_t(36 + data_size));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  pod(uint32_t(16));
  pod(uint16_t(1));   // PCM
  pod(uint16_t(1));   // mono
  pod(rate);
  pod(uint32_t(rate * 2));
  pod(uint16_t(2));
  pod(uint16_t(16));
  out.write("data", 4);
  pod(data_size);
  std::vector<int16_t> pcm(n);
  for (uint32_t i = 0; i < n; ++i) {
    const long q = std::lrintf(clip.samples[i] * 32768.0f);
    pcm[i] = static_cast<int16_t>(std::clamp<long>(q, -32768, 32767));
  }
  out.write(reinterpret_cast<const char*>(pcm.data()), data_size);
  if (!out) fail(path, "write failed");
}

AudioClip read_raw_f32(const std::string& path, int sample_rate) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(path, "cannot open");
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes % 4 != 0) fail(path, "size not a multiple of 4");
  in.seekg(0);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(bytes / 4);
  in.read(reinterpret_cast<char*>(clip.samples.data()), static_cast<std::streamsize>(bytes));
  if (!in) fail(path, "read failed");
  return clip;
}

void write_raw_f32(const std::string& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(clip.samples.data()),
            static_cast<std::streamsize>(clip.samples.size() * 4));
  if (!out) fail(path, "write failed");
}

}  // namespace amt
