#pragma once

#include <cstdint>
#include <vector>

#include "amt/graph.hpp"

namespace amt::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay: moments see only the raw gradient, the
/// decay term is applied directly to the weights.
template <typename S>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  AdamWConfig& config() { return cfg_; }
  const AdamWConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }

  /// Applies one update to every parameter in the store, then leaves
  /// gradients untouched (call zero_grads separately). Throws naming the
  /// parameter if its gradient is non-finite.
  void step(ParamStore<S>& params) {
    ensure_state(params);
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S lr = static_cast<S>(cfg_.lr), wd = static_cast<S>(cfg_.weight_decay);
    const S eps = static_cast<S>(cfg_.eps);
    for (size_t pi = 0; pi < params.count(); ++pi) {
      Parameter<S>& p = *params.all()[pi];
      if (!p.grad.all_finite())
        throw NumericError("adamw: non-finite gradient in parameter " + p.name);
      Tensor<S>& m = m_[pi];
      Tensor<S>& v = v_[pi];
      S* pv = p.value.data();
      const S* pg = p.grad.data();
      for (int64_t i = 0; i < p.value.size(); ++i) {
        m[i] = b1 * m[i] + (S(1) - b1) * pg[i];
        v[i] = b2 * v[i] + (S(1) - b2) * pg[i] * pg[i];
        const S mhat = m[i] / static_cast<S>(bc1);
        const S vhat = v[i] / static_cast<S>(bc2);
        pv[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * pv[i]);
      }
    }
  }

  // Checkpoint access: moments in parameter-store order.
  std::vector<Tensor<S>>& first_moments() { return m_; }
  std::vector<Tensor<S>>& second_moments() { return v_; }
  void set_step_count(int64_t s) { step_ = s; }
  void ensure_state(const ParamStore<S>& params) {
    if (!m_.empty()) return;
    for (const auto& p : params.all()) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

 private:
  AdamWConfig cfg_;
  int64_t step_ = 0;
  std::vector<Tensor<S>> m_, v_;
};

}  // namespace amt::nn
