#pragma once

#include <cmath>
#include <string>

#include "amt/graph.hpp"
#include "amt/rng.hpp"

namespace amt::model {

/// Per-parameter init stream keyed by name, so initialization is independent
/// of construction order.
inline uint64_t param_seed(uint64_t init_seed, const std::string& name) {
  return derive_seed(init_seed, {kStreamParamInit, hash_str(name.c_str())});
}

template <typename S>
nn::Tensor<S> xavier_uniform(nn::Shape shape, int64_t fan_in, int64_t fan_out, uint64_t seed) {
  nn::Tensor<S> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

template <typename S>
nn::Tensor<S> normal_init(nn::Shape shape, double stddev, uint64_t seed) {
  nn::Tensor<S> t(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.normal(0.0, stddev));
  return t;
}

template <typename S>
nn::Parameter<S>& make_linear_w(nn::ParamStore<S>& store, const std::string& name, int64_t in,
                                int64_t out, uint64_t init_seed) {
  return store.create(name, xavier_uniform<S>({in, out}, in, out, param_seed(init_seed, name)));
}

template <typename S>
nn::Parameter<S>& make_zeros(nn::ParamStore<S>& store, const std::string& name, nn::Shape shape) {
  return store.create(name, nn::Tensor<S>(std::move(shape)));
}

template <typename S>
nn::Parameter<S>& make_full(nn::ParamStore<S>& store, const std::string& name, nn::Shape shape,
                            S value) {
  return store.create(name, nn::Tensor<S>::full(std::move(shape), value));
}

}  // namespace amt::model
