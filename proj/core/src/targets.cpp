#include "amt/targets.hpp"

#include <algorithm>
#include <stdexcept>

namespace amt::train {

template <typename S>
TargetRoll<S> build_targets(const data::TrainingSample& sample, const data::InstrumentBank& bank,
                            int frames, double hop_seconds) {
  const int J = bank.size();
  TargetRoll<S> tgt;
  tgt.onset = nn::Tensor<S>({frames, J, 128});
  tgt.frame = nn::Tensor<S>({frames, J, 129});
  tgt.mask = data::instrument_mask(sample, bank);

  for (const data::Stem& stem : sample.stems) {
    if (!stem.labeled) continue;
    const int j = stem.instrument;
    if (j < 0 || j >= J) throw std::invalid_argument("build_targets: instrument id out of range");
    const bool percussive = bank.at(j).percussive;
    for (const NoteEvent& n : stem.notes) {
      if (n.pitch < 0 || n.pitch >= 128)
        throw std::invalid_argument("build_targets: pitch outside [0,128)");
      const int onset_frame = frame_of(n.onset, hop_seconds);
      if (n.onset >= 0.0 && onset_frame < frames)
        tgt.onset.at(std::min(onset_frame, frames - 1), j, n.pitch) = S(1);
      if (percussive) {
        // drums carry no offset information: one active frame per hit
        if (n.onset >= 0.0 && onset_frame < frames) tgt.frame.at(onset_frame, j, n.pitch) = S(1);
        continue;
      }
      const int first = std::max(0, onset_frame);
      const int last = std::min(frames - 1, frame_of(n.offset, hop_seconds));
      for (int t = first; t <= last; ++t) tgt.frame.at(t, j, n.pitch) = S(1);
    }
  }

  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < J; ++j) {
      bool any = false;
      for (int p = 0; p < 128; ++p)
        if (tgt.frame.at(t, j, p) != S(0)) {
          any = true;
          break;
        }
      tgt.frame.at(t, j, 128) = any ? S(0) : S(1);
    }
  return tgt;
}

std::vector<NoteEvent> labeled_notes(const data::TrainingSample& sample) {
  std::vector<NoteEvent> notes;
  for (const data::Stem& stem : sample.stems) {
    if (!stem.labeled) continue;
    for (const NoteEvent& n : stem.notes) {
      // notes sounding from before the window carry no onset event here and
      // are not scorable onset references
      if (n.onset < 0.0) continue;
      notes.push_back(n);
    }
  }
  sort_notes(notes);
  return notes;
}

template TargetRoll<float> build_targets<float>(const data::TrainingSample&,
                                                const data::InstrumentBank&, int, double);
template TargetRoll<double> build_targets<double>(const data::TrainingSample&,
                                                  const data::InstrumentBank&, int, double);

}  // namespace amt::train
