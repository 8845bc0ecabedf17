#include "amt/conv_frontend.hpp"

#include "init_util.hpp"

namespace amt::model {

using nn::Var;

template <typename S>
ConvFrontend<S>::ConvFrontend(const ModelConfig& cfg, nn::ParamStore<S>& store,
                              uint64_t init_seed)
    : cfg_(cfg) {
  int c_in = 1;
  for (int b = 0; b < cfg.conv_blocks(); ++b) {
    const int c_out = cfg.conv_channels[static_cast<size_t>(b)];
    const std::string pre = "conv.block" + std::to_string(b) + ".";
    Block blk;
    blk.norm1_g = &make_full<S>(store, pre + "norm1.gamma", {c_in}, S(1));
    blk.norm1_b = &make_zeros<S>(store, pre + "norm1.beta", {c_in});
    blk.conv1_w = &store.create(pre + "conv1.w",
                                xavier_uniform<S>({c_out, c_in * 9}, c_in * 9, c_out * 9,
                                                  param_seed(init_seed, pre + "conv1.w")));
    blk.conv1_b = &make_zeros<S>(store, pre + "conv1.b", {c_out});
    blk.norm2_g = &make_full<S>(store, pre + "norm2.gamma", {c_out}, S(1));
    blk.norm2_b = &make_zeros<S>(store, pre + "norm2.beta", {c_out});
    blk.conv2_w = &store.create(pre + "conv2.w",
                                xavier_uniform<S>({c_out, c_out * 9}, c_out * 9, c_out * 9,
                                                  param_seed(init_seed, pre + "conv2.w")));
    blk.conv2_b = &make_zeros<S>(store, pre + "conv2.b", {c_out});
    if (c_in != c_out) {
      blk.skip_w = &make_linear_w<S>(store, pre + "skip.w", c_in, c_out, init_seed);
      blk.skip_b = &make_zeros<S>(store, pre + "skip.b", {c_out});
    }
    blocks_.push_back(blk);
    c_in = c_out;
  }
}

namespace {

/// 1x1 channel lift: (Cin,T,F) -> (Cout,T,F).
template <typename S>
Var<S> lift1x1(Var<S> x, Var<S> w, Var<S> b) {
  Var<S> perm = nn::permute3(x, 1, 2, 0);  // (T,F,Cin)
  Var<S> lifted = nn::add_broadcast(nn::linear(perm, w), b);
  return nn::permute3(lifted, 2, 0, 1);
}

}  // namespace

template <typename S>
Var<S> ConvFrontend<S>::forward(nn::Var<S> spec) const {
  nn::Graph<S>& g = *spec.graph;
  if (spec.rank() != 2 || spec.dim(1) != cfg_.spec_bins)
    throw nn::NumericError("conv_frontend: expected (T, " + std::to_string(cfg_.spec_bins) +
                           ") input, got " + nn::shape_str(spec.shape()));
  Var<S> x = nn::reshape(spec, {1, spec.dim(0), spec.dim(1)});
  for (const Block& blk : blocks_) {
    Var<S> h = nn::relu(nn::instance_norm(x, g.param(*blk.norm1_g), g.param(*blk.norm1_b)));
    h = nn::conv2d_3x3(h, g.param(*blk.conv1_w), g.param(*blk.conv1_b));
    h = nn::relu(nn::instance_norm(h, g.param(*blk.norm2_g), g.param(*blk.norm2_b)));
    h = nn::conv2d_3x3(h, g.param(*blk.conv2_w), g.param(*blk.conv2_b));
    Var<S> skip = blk.skip_w ? lift1x1(x, g.param(*blk.skip_w), g.param(*blk.skip_b)) : x;
    x = nn::avgpool_freq2(nn::add(h, skip));
  }
  return nn::permute3(x, 1, 2, 0);  // (T, F, C)
}

template <typename S>
Var<S> ConvFrontend<S>::forward(nn::Graph<S>& g, const nn::Tensor<S>& spec) const {
  return forward(g.constant(spec));
}

template class ConvFrontend<float>;
template class ConvFrontend<double>;

}  // namespace amt::model
