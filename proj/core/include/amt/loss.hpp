#pragma once

#include "amt/ops.hpp"
#include "amt/targets.hpp"

namespace amt::train {

struct LossReport {
  double total = 0.0;
  std::vector<double> onset_terms;  // per instrument, 0 when masked
  std::vector<double> frame_terms;
};

template <typename S>
struct LossResult {
  nn::Var<S> total;  // scalar node
  LossReport report;
};

/// Sum over instruments of mean-BCE onset and frame terms. Masked
/// instruments never enter the graph, so they contribute exactly zero loss
/// and zero gradient.
template <typename S>
LossResult<S> multitask_loss(nn::Var<S> onset_pred, nn::Var<S> frame_pred,
                             const TargetRoll<S>& tgt);

}  // namespace amt::train
