#pragma once

#include "amt/perceiver.hpp"

namespace amt::model {

/// Two shared recurrent heads over the latent streams: latent row 2j carries
/// instrument j's onset stream, row 2j+1 its frame stream. Each head is a
/// 2-layer bidirectional GRU plus a sigmoid projection; the frame head also
/// sees the gradient-stopped onset probabilities, so onset conditioning
/// shapes frame predictions without back-propagating into the onset head.
template <typename S>
class OutputHeads {
 public:
  OutputHeads(const ModelConfig& cfg, nn::ParamStore<S>& store, uint64_t init_seed);

  struct Rolls {
    nn::Var<S> onset;  // (T, J, 128)
    nn::Var<S> frame;  // (T, J, 129)
  };

  Rolls forward(nn::Var<S> latents, ForwardCtx<S>& ctx) const;

 private:
  struct GruDir {
    nn::Parameter<S>*wx, *wh, *bx, *bh;
  };
  struct GruLayer {
    GruDir fwd, bwd;
  };
  struct Head {
    std::vector<GruLayer> layers;
    nn::Parameter<S>*out_w, *out_b;
  };

  Head make_head(const std::string& name, int in_dim, int out_dim, nn::ParamStore<S>& store,
                 uint64_t init_seed);
  nn::Var<S> bigru(nn::Var<S> x, const Head& head, ForwardCtx<S>& ctx) const;

  ModelConfig cfg_;
  Head onset_head_, frame_head_;
};

}  // namespace amt::model
