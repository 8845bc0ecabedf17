#pragma once

#include "amt/graph.hpp"
#include "amt/model_config.hpp"
#include "amt/ops.hpp"

namespace amt::model {

/// Residual CNN over the spectrogram. Each block is a pre-activation unit
/// (norm, relu, 3x3 conv, twice, plus skip) followed by (1,2) average
/// pooling, so the frequency axis halves per block and time is untouched.
/// Output is the (T, F, C) feature map.
template <typename S>
class ConvFrontend {
 public:
  ConvFrontend(const ModelConfig& cfg, nn::ParamStore<S>& store, uint64_t init_seed);

  /// spec: (T, spec_bins) log-magnitude input.
  nn::Var<S> forward(nn::Graph<S>& g, const nn::Tensor<S>& spec) const;
  nn::Var<S> forward(nn::Var<S> spec) const;

 private:
  struct Block {
    nn::Parameter<S>*norm1_g, *norm1_b, *conv1_w, *conv1_b;
    nn::Parameter<S>*norm2_g, *norm2_b, *conv2_w, *conv2_b;
    nn::Parameter<S>*skip_w = nullptr, *skip_b = nullptr;  // 1x1 lift when channels change
  };
  ModelConfig cfg_;
  std::vector<Block> blocks_;
};

}  // namespace amt::model
