#include "amt/perceiver.hpp"

#include <cmath>

#include "init_util.hpp"

namespace amt::model {

using nn::Var;

AttentionCounters& attention_counters() {
  static AttentionCounters counters;
  return counters;
}

AttentionCost attention_cost(const ModelConfig& cfg, int64_t frames, int64_t bins) {
  if (frames <= 0 || bins <= 0) throw std::invalid_argument("attention_cost: dims must be positive");
  const int64_t L = cfg.blocks, N = cfg.latent_layers, M = cfg.temporal_layers;
  const int64_t K = cfg.num_latents();
  AttentionCost cost;
  cost.sca_pairs = L * frames * bins * K;
  cost.latent_pairs = L * N * frames * K * K;
  cost.temporal_pairs = L * M * K * frames * frames;
  cost.total = cost.sca_pairs + cost.latent_pairs + cost.temporal_pairs;
  cost.spectnt_spectral_pairs = L * N * frames * bins * bins;
  return cost;
}

template <typename S>
PerceiverTF<S>::PerceiverTF(const ModelConfig& cfg, nn::ParamStore<S>& store, uint64_t init_seed)
    : cfg_(cfg) {
  const int K = cfg.num_latents();
  const int D = cfg.latent_dim;
  const int C = cfg.feature_channels();
  const int F = cfg.feature_bins();
  theta0_ = &store.create("latents.theta0",
                          normal_init<S>({K, D}, 0.02, param_seed(init_seed, "latents.theta0")));
  if (cfg.temporal_pos_emb)
    time_pos_ = &store.create(
        "latents.time_pos",
        normal_init<S>({cfg.frames(), D}, 0.02, param_seed(init_seed, "latents.time_pos")));
  if (cfg.freq_pos_emb)
    freq_pos_ = &store.create(
        "sca.freq_pos", normal_init<S>({F, C}, 0.02, param_seed(init_seed, "sca.freq_pos")));

  auto make_attn = [&](const std::string& pre, int kv_dim) {
    Attn a;
    a.wq = &make_linear_w<S>(store, pre + "wq", D, D, init_seed);
    a.bq = &make_zeros<S>(store, pre + "bq", {D});
    a.wk = &make_linear_w<S>(store, pre + "wk", kv_dim, D, init_seed);
    a.bk = &make_zeros<S>(store, pre + "bk", {D});
    a.wv = &make_linear_w<S>(store, pre + "wv", kv_dim, D, init_seed);
    a.bv = &make_zeros<S>(store, pre + "bv", {D});
    a.wo = &make_linear_w<S>(store, pre + "wo", D, D, init_seed);
    a.bo = &make_zeros<S>(store, pre + "bo", {D});
    return a;
  };
  auto make_ffn = [&](const std::string& pre) {
    Ffn f;
    const int hidden = D * cfg.ffn_mult;
    f.ln_g = &make_full<S>(store, pre + "ln.gamma", {D}, S(1));
    f.ln_b = &make_zeros<S>(store, pre + "ln.beta", {D});
    f.w1 = &make_linear_w<S>(store, pre + "w1", D, hidden, init_seed);
    f.b1 = &make_zeros<S>(store, pre + "b1", {hidden});
    f.w2 = &make_linear_w<S>(store, pre + "w2", hidden, D, init_seed);
    f.b2 = &make_zeros<S>(store, pre + "b2", {D});
    return f;
  };
  auto make_self = [&](const std::string& pre) {
    SelfLayer l;
    l.ln_g = &make_full<S>(store, pre + "ln.gamma", {D}, S(1));
    l.ln_b = &make_zeros<S>(store, pre + "ln.beta", {D});
    l.attn = make_attn(pre + "attn.", D);
    l.ffn = make_ffn(pre + "ffn.");
    return l;
  };

  for (int h = 0; h < cfg.blocks; ++h) {
    const std::string bp = "block" + std::to_string(h) + ".";
    BlockParams blk;
    blk.sca.ln_q_g = &make_full<S>(store, bp + "sca.ln_q.gamma", {D}, S(1));
    blk.sca.ln_q_b = &make_zeros<S>(store, bp + "sca.ln_q.beta", {D});
    blk.sca.ln_kv_g = &make_full<S>(store, bp + "sca.ln_kv.gamma", {C}, S(1));
    blk.sca.ln_kv_b = &make_zeros<S>(store, bp + "sca.ln_kv.beta", {C});
    blk.sca.attn = make_attn(bp + "sca.attn.", C);
    blk.sca.ffn = make_ffn(bp + "sca.ffn.");
    for (int n = 0; n < cfg.latent_layers; ++n)
      blk.latent.push_back(make_self(bp + "latent" + std::to_string(n) + "."));
    for (int m = 0; m < cfg.temporal_layers; ++m)
      blk.temporal.push_back(make_self(bp + "temporal" + std::to_string(m) + "."));
    blocks_.push_back(std::move(blk));
  }
}

template <typename S>
Var<S> PerceiverTF<S>::init_latents(nn::Graph<S>& g, int64_t frames) const {
  const int64_t K = cfg_.num_latents(), D = cfg_.latent_dim;
  if (time_pos_ && frames > time_pos_->value.dim(0))
    throw nn::NumericError("init_latents: " + std::to_string(frames) +
                           " frames exceed the positional table length " +
                           std::to_string(time_pos_->value.dim(0)));
  Var<S> theta = g.param(*theta0_);
  Var<S> pe = time_pos_ ? g.param(*time_pos_) : Var<S>{};
  nn::Tensor<S> out({frames, K, D});
  {
    const nn::Tensor<S>& tv = theta.value();
    S* po = out.data();
    for (int64_t t = 0; t < frames; ++t) {
      std::copy(tv.data(), tv.data() + K * D, po + t * K * D);
      if (time_pos_) {
        const S* per = pe.value().data() + t * D;
        for (int64_t k = 0; k < K; ++k)
          for (int64_t d = 0; d < D; ++d) po[(t * K + k) * D + d] += per[d];
      }
    }
  }
  const int itheta = theta.id;
  const int ipe = time_pos_ ? pe.id : -1;
  return g.make(std::move(out), true, [itheta, ipe, frames, K, D](nn::Graph<S>& gg, int self) {
    const nn::Tensor<S>& go = gg.grad(self);
    if (gg.needs_grad(itheta)) {
      nn::Tensor<S>& dt = gg.grad(itheta);
      for (int64_t t = 0; t < frames; ++t)
        for (int64_t i = 0; i < K * D; ++i) dt[i] += go[t * K * D + i];
    }
    if (ipe >= 0 && gg.needs_grad(ipe)) {
      nn::Tensor<S>& dp = gg.grad(ipe);
      for (int64_t t = 0; t < frames; ++t)
        for (int64_t k = 0; k < K; ++k)
          for (int64_t d = 0; d < D; ++d) dp[t * D + d] += go[(t * K + k) * D + d];
    }
  });
}

template <typename S>
Var<S> PerceiverTF<S>::mha(ForwardCtx<S>& ctx, Var<S> q_in, Var<S> kv_in, const Attn& p,
                           std::atomic<uint64_t>& pair_counter) const {
  nn::Graph<S>& g = *ctx.graph;
  const int heads = cfg_.heads;
  Var<S> q = nn::add_broadcast(nn::linear(q_in, g.param(*p.wq)), g.param(*p.bq));
  Var<S> k = nn::add_broadcast(nn::linear(kv_in, g.param(*p.wk)), g.param(*p.bk));
  Var<S> v = nn::add_broadcast(nn::linear(kv_in, g.param(*p.wv)), g.param(*p.bv));
  Var<S> qh = nn::split_heads(q, heads);
  Var<S> kh = nn::split_heads(k, heads);
  Var<S> vh = nn::split_heads(v, heads);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim()));
  Var<S> scores = nn::scale(nn::bmm_nt(qh, kh), inv_scale);
  pair_counter += static_cast<uint64_t>(q_in.dim(0)) * static_cast<uint64_t>(q_in.dim(1)) *
                  static_cast<uint64_t>(kv_in.dim(1));
  Var<S> probs = nn::softmax_last(scores);
  Var<S> ctxv = nn::merge_heads(nn::bmm(probs, vh), heads);
  return nn::add_broadcast(nn::linear(ctxv, g.param(*p.wo)), g.param(*p.bo));
}

template <typename S>
Var<S> PerceiverTF<S>::ffn_residual(ForwardCtx<S>& ctx, Var<S> x, const Ffn& p) const {
  nn::Graph<S>& g = *ctx.graph;
  Var<S> h = nn::layer_norm(x, g.param(*p.ln_g), g.param(*p.ln_b));
  h = nn::relu(nn::add_broadcast(nn::linear(h, g.param(*p.w1)), g.param(*p.b1)));
  h = nn::add_broadcast(nn::linear(h, g.param(*p.w2)), g.param(*p.b2));
  if (ctx.training && ctx.dropout > 0) h = nn::dropout(h, ctx.dropout, ctx.dropout_rng);
  return nn::add(x, h);
}

template <typename S>
Var<S> PerceiverTF<S>::self_layer(ForwardCtx<S>& ctx, Var<S> x, const SelfLayer& p,
                                  std::atomic<uint64_t>& counter) const {
  nn::Graph<S>& g = *ctx.graph;
  Var<S> normed = nn::layer_norm(x, g.param(*p.ln_g), g.param(*p.ln_b));
  Var<S> a = mha(ctx, normed, normed, p.attn, counter);
  if (ctx.training && ctx.dropout > 0) a = nn::dropout(a, ctx.dropout, ctx.dropout_rng);
  return ffn_residual(ctx, nn::add(x, a), p.ffn);
}

template <typename S>
Var<S> PerceiverTF<S>::spectral_cross_attention(int block, Var<S> latents, Var<S> features,
                                                ForwardCtx<S>& ctx) const {
  nn::Graph<S>& g = *ctx.graph;
  const CrossLayer& p = blocks_[static_cast<size_t>(block)].sca;
  Var<S> kv = features;
  if (freq_pos_) kv = nn::add_broadcast(kv, g.param(*freq_pos_));
  kv = nn::layer_norm(kv, g.param(*p.ln_kv_g), g.param(*p.ln_kv_b));
  Var<S> q = nn::layer_norm(latents, g.param(*p.ln_q_g), g.param(*p.ln_q_b));
  Var<S> a = mha(ctx, q, kv, p.attn, attention_counters().sca);
  if (ctx.training && ctx.dropout > 0) a = nn::dropout(a, ctx.dropout, ctx.dropout_rng);
  return ffn_residual(ctx, nn::add(latents, a), p.ffn);
}

template <typename S>
Var<S> PerceiverTF<S>::latent_transformer(int block, Var<S> latents, ForwardCtx<S>& ctx) const {
  Var<S> x = latents;  // (T,K,D): frames are the batch
  for (const SelfLayer& layer : blocks_[static_cast<size_t>(block)].latent)
    x = self_layer(ctx, x, layer, attention_counters().latent);
  return x;
}

template <typename S>
Var<S> PerceiverTF<S>::temporal_transformer(int block, Var<S> latents, ForwardCtx<S>& ctx) const {
  // (T,K,D) -> (K,T,D): each latent index becomes an independent sequence
  Var<S> x = nn::permute3(latents, 1, 0, 2);
  for (const SelfLayer& layer : blocks_[static_cast<size_t>(block)].temporal)
    x = self_layer(ctx, x, layer, attention_counters().temporal);
  return nn::permute3(x, 1, 0, 2);
}

template <typename S>
Var<S> PerceiverTF<S>::forward(Var<S> features, ForwardCtx<S>& ctx) const {
  if (features.rank() != 3 || features.dim(1) != cfg_.feature_bins() ||
      features.dim(2) != cfg_.feature_channels())
    throw nn::NumericError("perceiver: expected (T," + std::to_string(cfg_.feature_bins()) + "," +
                           std::to_string(cfg_.feature_channels()) + ") features, got " +
                           nn::shape_str(features.shape()));
  Var<S> theta = init_latents(*ctx.graph, features.dim(0));
  for (int h = 0; h < cfg_.blocks; ++h) {
    theta = spectral_cross_attention(h, theta, features, ctx);
    theta = latent_transformer(h, theta, ctx);
    theta = temporal_transformer(h, theta, ctx);
  }
  return theta;
}

template class PerceiverTF<float>;
template class PerceiverTF<double>;

}  // namespace amt::model
