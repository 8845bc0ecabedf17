#include "amt/model.hpp"

namespace amt::model {

template <typename S>
TranscriptionModel<S>::TranscriptionModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  conv_ = std::make_unique<ConvFrontend<S>>(cfg_, store_, init_seed);
  encoder_ = std::make_unique<PerceiverTF<S>>(cfg_, store_, init_seed);
  heads_ = std::make_unique<OutputHeads<S>>(cfg_, store_, init_seed);
}

template <typename S>
typename TranscriptionModel<S>::Output TranscriptionModel<S>::forward(
    ForwardCtx<S>& ctx, const nn::Tensor<S>& spec) const {
  Output out;
  out.features = conv_->forward(*ctx.graph, spec);
  out.latents = encoder_->forward(out.features, ctx);
  auto rolls = heads_->forward(out.latents, ctx);
  out.onset = rolls.onset;
  out.frame = rolls.frame;
  return out;
}

template <typename S>
typename TranscriptionModel<S>::Output TranscriptionModel<S>::forward_features(
    ForwardCtx<S>& ctx, nn::Var<S> features) const {
  Output out;
  out.features = features;
  out.latents = encoder_->forward(features, ctx);
  auto rolls = heads_->forward(out.latents, ctx);
  out.onset = rolls.onset;
  out.frame = rolls.frame;
  return out;
}

template <typename S>
typename TranscriptionModel<S>::InferredRolls TranscriptionModel<S>::infer(
    const nn::Tensor<S>& spec) const {
  nn::Graph<S> g;
  g.set_grad_enabled(false);
  ForwardCtx<S> ctx;
  ctx.graph = &g;
  ctx.training = false;
  Output out = forward(ctx, spec);
  return {out.onset.value(), out.frame.value()};
}

template class TranscriptionModel<float>;
template class TranscriptionModel<double>;

}  // namespace amt::model
