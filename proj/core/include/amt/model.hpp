#pragma once

#include <memory>

#include "amt/conv_frontend.hpp"
#include "amt/heads.hpp"
#include "amt/perceiver.hpp"

namespace amt::model {

/// The full transcription network: conv frontend -> stacked encoder ->
/// recurrent onset/frame heads.
template <typename S>
class TranscriptionModel {
 public:
  TranscriptionModel(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore<S>& params() { return store_; }
  const nn::ParamStore<S>& params() const { return store_; }
  const ConvFrontend<S>& conv() const { return *conv_; }
  const PerceiverTF<S>& encoder() const { return *encoder_; }
  const OutputHeads<S>& heads() const { return *heads_; }

  struct Output {
    nn::Var<S> features;  // (T,F,C)
    nn::Var<S> latents;   // (T,K,D)
    nn::Var<S> onset;     // (T,J,128)
    nn::Var<S> frame;     // (T,J,129)
  };

  Output forward(ForwardCtx<S>& ctx, const nn::Tensor<S>& spec) const;
  /// Skips the conv frontend; features are fed to the encoder directly.
  Output forward_features(ForwardCtx<S>& ctx, nn::Var<S> features) const;

  struct InferredRolls {
    nn::Tensor<S> onset;  // (T,J,128)
    nn::Tensor<S> frame;  // (T,J,129)
  };
  /// Inference convenience: no dropout, no gradient bookkeeping.
  InferredRolls infer(const nn::Tensor<S>& spec) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore<S> store_;
  std::unique_ptr<ConvFrontend<S>> conv_;
  std::unique_ptr<PerceiverTF<S>> encoder_;
  std::unique_ptr<OutputHeads<S>> heads_;
};

}  // namespace amt::model
