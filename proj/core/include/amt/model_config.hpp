#pragma once

#include <string>
#include <vector>

#include "amt/spectrogram.hpp"

namespace amt::model {

/// Architecture hyperparameters. The full-size configuration is 13
/// instruments (so 26 latent arrays), latent width 128, 3 blocks of
/// {1 spectral cross-attention, 2 latent-transformer, 2 temporal-transformer}
/// layers with 8 heads, a 3-block/128-channel conv frontend over 1024
/// spectrogram bins, and 2-layer bidirectional recurrent heads of width 128.
struct ModelConfig {
  std::string bank = "full";
  int instruments = 13;  // J
  int latent_dim = 128;  // D
  int blocks = 3;        // L
  int latent_layers = 2;    // N, per block
  int temporal_layers = 2;  // M, per block
  int heads = 8;
  double dropout = 0.15;
  int ffn_mult = 4;
  std::vector<int> conv_channels = {128, 128, 128};
  int spec_bins = 1024;
  double window_seconds = 6.0;
  int gru_hidden = 128;
  bool freq_pos_emb = true;
  bool temporal_pos_emb = true;

  int num_latents() const { return 2 * instruments; }  // K = 2J
  int head_dim() const { return latent_dim / heads; }
  int conv_blocks() const { return static_cast<int>(conv_channels.size()); }
  int feature_channels() const { return conv_channels.back(); }  // C
  int feature_bins() const { return spec_bins >> conv_blocks(); }  // F
  int window_samples() const;
  int frames() const;  // T

  dsp::StftConfig stft() const;
  void validate() const;

  std::string to_kv() const;
  static ModelConfig from_kv(const std::string& text);
  /// "full", "desk" (3-instrument reduced size) or "gradcheck" (tiny,
  /// verification-sized).
  static ModelConfig preset(const std::string& name);
};

}  // namespace amt::model
