#pragma once

#include <atomic>
#include <vector>

#include "amt/graph.hpp"
#include "amt/model_config.hpp"
#include "amt/ops.hpp"

namespace amt::model {

/// Query-key score evaluations counted during forward passes, one count per
/// (query position, key position) pair; heads share the pair. Process-wide
/// and reset explicitly by benchmarks and tests.
struct AttentionCounters {
  std::atomic<uint64_t> sca{0};
  std::atomic<uint64_t> latent{0};
  std::atomic<uint64_t> temporal{0};

  void reset() {
    sca = 0;
    latent = 0;
    temporal = 0;
  }
  uint64_t total() const { return sca + latent + temporal; }
};

AttentionCounters& attention_counters();

struct AttentionCost {
  int64_t sca_pairs = 0;
  int64_t latent_pairs = 0;
  int64_t temporal_pairs = 0;
  int64_t total = 0;
  int64_t spectnt_spectral_pairs = 0;  // frame-level full self-attention baseline
};

/// Closed-form score-pair counts for one forward pass:
/// sca = L*T*F*K, latent = L*N*T*K^2, temporal = L*M*K*T^2. The baseline
/// column is the L*N*T*F^2 cost of running the latent-transformer stack
/// directly on the spectral axis.
AttentionCost attention_cost(const ModelConfig& cfg, int64_t frames, int64_t bins);

template <typename S>
struct ForwardCtx {
  nn::Graph<S>* graph = nullptr;
  bool training = false;
  double dropout = 0.0;
  Rng dropout_rng{0};
};

/// The stacked encoder: per block, spectral cross-attention reads the same
/// feature map into the latent arrays, a latent transformer mixes the K
/// arrays within each frame, and a temporal transformer runs along time
/// independently per array index. No weights are shared across blocks.
template <typename S>
class PerceiverTF {
 public:
  PerceiverTF(const ModelConfig& cfg, nn::ParamStore<S>& store, uint64_t init_seed);

  /// Repeats the learned K x D latent block across T frames and adds the
  /// temporal positional embedding (once, at initialization).
  nn::Var<S> init_latents(nn::Graph<S>& g, int64_t frames) const;

  /// features (T,F,C) -> final latents (T,K,D).
  nn::Var<S> forward(nn::Var<S> features, ForwardCtx<S>& ctx) const;

  nn::Var<S> spectral_cross_attention(int block, nn::Var<S> latents, nn::Var<S> features,
                                      ForwardCtx<S>& ctx) const;
  nn::Var<S> latent_transformer(int block, nn::Var<S> latents, ForwardCtx<S>& ctx) const;
  nn::Var<S> temporal_transformer(int block, nn::Var<S> latents, ForwardCtx<S>& ctx) const;

 private:
  struct Attn {
    nn::Parameter<S>*wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  struct Ffn {
    nn::Parameter<S>*ln_g, *ln_b, *w1, *b1, *w2, *b2;
  };
  struct SelfLayer {
    nn::Parameter<S>*ln_g, *ln_b;
    Attn attn;
    Ffn ffn;
  };
  struct CrossLayer {
    nn::Parameter<S>*ln_q_g, *ln_q_b, *ln_kv_g, *ln_kv_b;
    Attn attn;
    Ffn ffn;
  };
  struct BlockParams {
    CrossLayer sca;
    std::vector<SelfLayer> latent;
    std::vector<SelfLayer> temporal;
  };

  nn::Var<S> mha(ForwardCtx<S>& ctx, nn::Var<S> q_in, nn::Var<S> kv_in, const Attn& p,
                 std::atomic<uint64_t>& pair_counter) const;
  nn::Var<S> ffn_residual(ForwardCtx<S>& ctx, nn::Var<S> x, const Ffn& p) const;
  nn::Var<S> self_layer(ForwardCtx<S>& ctx, nn::Var<S> x, const SelfLayer& p,
                        std::atomic<uint64_t>& counter) const;

  ModelConfig cfg_;
  nn::Parameter<S>* theta0_ = nullptr;
  nn::Parameter<S>* time_pos_ = nullptr;  // null when disabled
  nn::Parameter<S>* freq_pos_ = nullptr;  // null when disabled
  std::vector<BlockParams> blocks_;
};

}  // namespace amt::model
