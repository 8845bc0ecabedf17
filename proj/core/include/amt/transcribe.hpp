#pragma once

#include "amt/audio.hpp"
#include "amt/instruments.hpp"
#include "amt/model.hpp"
#include "amt/notes.hpp"

namespace amt {

/// Runs the model over non-overlapping model-length windows (the tail window
/// is zero-padded) and concatenates the decoded notes, offset by each
/// window's start time. Notes split by a window boundary are not merged.
template <typename S>
std::vector<NoteEvent> transcribe_clip(const model::TranscriptionModel<S>& m,
                                       const AudioClip& clip,
                                       const data::InstrumentBank& bank,
                                       double threshold = 0.25);

}  // namespace amt
