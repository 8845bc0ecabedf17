#pragma once

#include "amt/graph.hpp"
#include "amt/rng.hpp"

namespace amt::nn {

// Differentiable operations. Each computes its value eagerly and registers a
// backward closure on the tape when any input requires gradients.

template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);
template <typename S> Var<S> scale(Var<S> a, double c);

/// x + b where b's shape is a suffix of x's shape (bias / positional tables).
template <typename S> Var<S> add_broadcast(Var<S> x, Var<S> b);

template <typename S> Var<S> matmul(Var<S> a, Var<S> b);  // (M,K)x(K,N)
/// (..., In) x (In, Out) -> (..., Out); leading dims flattened.
template <typename S> Var<S> linear(Var<S> x, Var<S> w);
template <typename S> Var<S> bmm(Var<S> a, Var<S> b);     // (B,M,K)x(B,K,N)
template <typename S> Var<S> bmm_nt(Var<S> a, Var<S> b);  // (B,M,K)x(B,N,K)->(B,M,N)

template <typename S> Var<S> transpose(Var<S> x);  // 2-D
template <typename S> Var<S> permute3(Var<S> x, int a0, int a1, int a2);
template <typename S> Var<S> reshape(Var<S> x, Shape shape);
template <typename S> Var<S> split_heads(Var<S> x, int heads);  // (B,T,D)->(B*H,T,D/H)
template <typename S> Var<S> merge_heads(Var<S> x, int heads);  // (B*H,T,D/H)->(B,T,D)
template <typename S> Var<S> concat_last(Var<S> a, Var<S> b);
template <typename S> Var<S> slice(Var<S> x, int axis, int64_t start, int64_t len);
/// (T,K,D) -> (K/stride, T, D), picking rows k = start, start+stride, ...
template <typename S> Var<S> pick_latents(Var<S> x, int start, int stride);

template <typename S> Var<S> relu(Var<S> x);
template <typename S> Var<S> sigmoid(Var<S> x);
template <typename S> Var<S> tanh_op(Var<S> x);
template <typename S> Var<S> softmax_last(Var<S> x);
template <typename S> Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps = 1e-5);
/// Per-channel normalization over everything after dim 0, with a scalar
/// affine pair per channel. gamma/beta have length x.dim(0).
template <typename S> Var<S> instance_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps = 1e-5);

template <typename S> Var<S> mean_all(Var<S> x);
template <typename S> Var<S> sum_all(Var<S> x);
/// Mean binary cross-entropy against a constant 0/1 target, probabilities
/// clamped to [1e-7, 1-1e-7]. Throws if pred leaves [0,1].
template <typename S> Var<S> bce_mean(Var<S> pred, const Tensor<S>& target);

/// Inverted dropout with the Bernoulli mask recorded on the tape, so backward
/// is exact and a fixed rng stream reproduces the forward bit-for-bit.
template <typename S> Var<S> dropout(Var<S> x, double rate, Rng& rng);
template <typename S> Var<S> stop_gradient(Var<S> x);

/// 3x3 same-padded convolution. x:(Cin,T,F), w:(Cout,Cin*9), b:(Cout).
template <typename S> Var<S> conv2d_3x3(Var<S> x, Var<S> w, Var<S> b);
/// (1,2) average pooling over the frequency axis. (C,T,F)->(C,T,F/2).
template <typename S> Var<S> avgpool_freq2(Var<S> x);

/// Single-direction GRU scan over (B,T,In) with weights wx:(3H,In),
/// wh:(3H,H), biases (3H); gate layout [reset, update, candidate].
/// Full BPTT through the recurrence.
template <typename S>
Var<S> gru_scan(Var<S> x, Var<S> wx, Var<S> wh, Var<S> bx, Var<S> bh, bool reverse);

/// Raw GEMM on row-major buffers: c = alpha * op(a) * op(b) + beta * c.
template <typename S>
void gemm(bool a_t, bool b_t, int64_t m, int64_t n, int64_t k, S alpha, const S* a, const S* b,
          S beta, S* c);

}  // namespace amt::nn
