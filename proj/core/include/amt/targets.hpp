#pragma once

#include <vector>

#include "amt/dataset.hpp"
#include "amt/tensor.hpp"

namespace amt::train {

/// Frame index holding a time in seconds at a 20 ms hop, with a small nudge
/// so lattice-aligned times land on their exact frame.
inline int frame_of(double seconds, double hop_seconds = 0.020) {
  return static_cast<int>(std::floor(seconds / hop_seconds + 1e-6));
}

/// Binary supervision grids. The frame grid's 129th channel marks silence:
/// it is 1 exactly when no pitch of that instrument is active in the frame.
/// Masked-out instruments (false entries) carry all-zero grids and are
/// excluded from the loss; instruments merely absent from the sample stay
/// masked-in with zero targets.
template <typename S>
struct TargetRoll {
  nn::Tensor<S> onset;  // (T, J, 128)
  nn::Tensor<S> frame;  // (T, J, 129)
  std::vector<bool> mask;
};

template <typename S>
TargetRoll<S> build_targets(const data::TrainingSample& sample, const data::InstrumentBank& bank,
                            int frames, double hop_seconds = 0.020);

/// All reference notes of the sample's labeled stems (for scoring).
std::vector<NoteEvent> labeled_notes(const data::TrainingSample& sample);

}  // namespace amt::train
