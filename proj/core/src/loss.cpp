#include "amt/loss.hpp"

namespace amt::train {

namespace {

template <typename S>
nn::Tensor<S> instrument_slice(const nn::Tensor<S>& t, int j) {
  const int64_t T = t.dim(0), J = t.dim(1), P = t.dim(2);
  nn::Tensor<S> out({T, 1, P});
  for (int64_t i = 0; i < T; ++i)
    std::copy(t.data() + (i * J + j) * P, t.data() + (i * J + j + 1) * P, out.data() + i * P);
  return out;
}

}  // namespace

template <typename S>
LossResult<S> multitask_loss(nn::Var<S> onset_pred, nn::Var<S> frame_pred,
                             const TargetRoll<S>& tgt) {
  nn::Graph<S>& g = *onset_pred.graph;
  if (onset_pred.shape() != tgt.onset.shape() || frame_pred.shape() != tgt.frame.shape())
    throw nn::NumericError("multitask_loss: prediction/target shape mismatch");
  const int J = static_cast<int>(tgt.mask.size());
  LossResult<S> res;
  res.report.onset_terms.assign(static_cast<size_t>(J), 0.0);
  res.report.frame_terms.assign(static_cast<size_t>(J), 0.0);
  nn::Var<S> total;
  for (int j = 0; j < J; ++j) {
    if (!tgt.mask[static_cast<size_t>(j)]) continue;
    nn::Var<S> l_onset = nn::bce_mean(nn::slice(onset_pred, 1, j, 1), instrument_slice(tgt.onset, j));
    nn::Var<S> l_frame = nn::bce_mean(nn::slice(frame_pred, 1, j, 1), instrument_slice(tgt.frame, j));
    res.report.onset_terms[static_cast<size_t>(j)] = static_cast<double>(l_onset.value()[0]);
    res.report.frame_terms[static_cast<size_t>(j)] = static_cast<double>(l_frame.value()[0]);
    nn::Var<S> term = nn::add(l_onset, l_frame);
    total = total.defined() ? nn::add(total, term) : term;
  }
  if (!total.defined()) total = g.constant(nn::Tensor<S>::scalar(S(0)));
  res.total = total;
  res.report.total = static_cast<double>(total.value()[0]);
  return res;
}

template LossResult<float> multitask_loss<float>(nn::Var<float>, nn::Var<float>,
                                                 const TargetRoll<float>&);
template LossResult<double> multitask_loss<double>(nn::Var<double>, nn::Var<double>,
                                                   const TargetRoll<double>&);

}  // namespace amt::train
