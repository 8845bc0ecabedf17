#pragma once

#include <vector>

#include "amt/instruments.hpp"
#include "amt/notes.hpp"
#include "amt/tensor.hpp"

namespace amt::decode {

/// Onset-gated pianoroll decoding at a fixed probability threshold.
///
/// A note opens at frame t of instrument j, pitch p when the onset
/// probability exceeds the threshold and t is a local maximum of its
/// supra-threshold run (ties resolve to the earliest frame, so a plateau
/// fires once). The note sustains while the binarized frame activation stays
/// on and closes at the first inactive frame or at the next onset, whichever
/// comes first; a note whose frame activation is already off closes after one
/// hop. Percussive classes emit fixed one-hop notes from onsets alone. The
/// silence channel is ignored. No post-processing beyond this rule.
template <typename S>
std::vector<NoteEvent> decode(const nn::Tensor<S>& onset, const nn::Tensor<S>& frame,
                              const data::InstrumentBank& bank, double threshold = 0.25,
                              double hop_seconds = 0.020);

}  // namespace amt::decode
