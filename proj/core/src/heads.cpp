#include "amt/heads.hpp"

#include "init_util.hpp"

namespace amt::model {

using nn::Var;

template <typename S>
typename OutputHeads<S>::Head OutputHeads<S>::make_head(const std::string& name, int in_dim,
                                                        int out_dim, nn::ParamStore<S>& store,
                                                        uint64_t init_seed) {
  const int h = cfg_.gru_hidden;
  Head head;
  int layer_in = in_dim;
  for (int l = 0; l < 2; ++l) {
    GruLayer layer;
    for (int d = 0; d < 2; ++d) {
      const std::string pre =
          name + ".l" + std::to_string(l) + (d == 0 ? ".fwd." : ".bwd.");
      GruDir dir;
      dir.wx = &store.create(pre + "wx", xavier_uniform<S>({3 * h, layer_in}, layer_in, h,
                                                           param_seed(init_seed, pre + "wx")));
      dir.wh = &store.create(
          pre + "wh", xavier_uniform<S>({3 * h, h}, h, h, param_seed(init_seed, pre + "wh")));
      dir.bx = &make_zeros<S>(store, pre + "bx", {3 * h});
      dir.bh = &make_zeros<S>(store, pre + "bh", {3 * h});
      (d == 0 ? layer.fwd : layer.bwd) = dir;
    }
    head.layers.push_back(layer);
    layer_in = 2 * h;
  }
  head.out_w = &make_linear_w<S>(store, name + ".out.w", 2 * h, out_dim, init_seed);
  // sparse targets: start the sigmoid outputs low
  head.out_b = &make_full<S>(store, name + ".out.b", {out_dim}, S(-3));
  return head;
}

template <typename S>
OutputHeads<S>::OutputHeads(const ModelConfig& cfg, nn::ParamStore<S>& store, uint64_t init_seed)
    : cfg_(cfg) {
  onset_head_ = make_head("head.onset", cfg.latent_dim, 128, store, init_seed);
  frame_head_ = make_head("head.frame", cfg.latent_dim + 128, 129, store, init_seed);
}

template <typename S>
Var<S> OutputHeads<S>::bigru(Var<S> x, const Head& head, ForwardCtx<S>& ctx) const {
  nn::Graph<S>& g = *ctx.graph;
  for (const GruLayer& layer : head.layers) {
    Var<S> f = nn::gru_scan(x, g.param(*layer.fwd.wx), g.param(*layer.fwd.wh),
                            g.param(*layer.fwd.bx), g.param(*layer.fwd.bh), false);
    Var<S> b = nn::gru_scan(x, g.param(*layer.bwd.wx), g.param(*layer.bwd.wh),
                            g.param(*layer.bwd.bx), g.param(*layer.bwd.bh), true);
    x = nn::concat_last(f, b);
  }
  return x;
}

template <typename S>
typename OutputHeads<S>::Rolls OutputHeads<S>::forward(Var<S> latents, ForwardCtx<S>& ctx) const {
  nn::Graph<S>& g = *ctx.graph;
  if (latents.rank() != 3 || latents.dim(1) % 2 != 0)
    throw nn::NumericError("heads: latents must be (T,2J,D), got " +
                           nn::shape_str(latents.shape()));
  Var<S> onset_in = nn::pick_latents(latents, 0, 2);  // (J,T,D)
  Var<S> onset_h = bigru(onset_in, onset_head_, ctx);
  Var<S> onset_probs = nn::sigmoid(nn::add_broadcast(nn::linear(onset_h, g.param(*onset_head_.out_w)),
                                                     g.param(*onset_head_.out_b)));
  Var<S> frame_in =
      nn::concat_last(nn::pick_latents(latents, 1, 2), nn::stop_gradient(onset_probs));
  Var<S> frame_h = bigru(frame_in, frame_head_, ctx);
  Var<S> frame_probs = nn::sigmoid(nn::add_broadcast(nn::linear(frame_h, g.param(*frame_head_.out_w)),
                                                     g.param(*frame_head_.out_b)));
  Rolls rolls;
  rolls.onset = nn::permute3(onset_probs, 1, 0, 2);  // (T,J,128)
  rolls.frame = nn::permute3(frame_probs, 1, 0, 2);  // (T,J,129)
  return rolls;
}

template class OutputHeads<float>;
template class OutputHeads<double>;

}  // namespace amt::model
