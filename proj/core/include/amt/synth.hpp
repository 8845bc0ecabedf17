#pragma once

#include <cstdint>
#include <vector>

#include "amt/audio.hpp"
#include "amt/instruments.hpp"
#include "amt/notes.hpp"
#include "amt/rng.hpp"

namespace amt::data {

/// Renders one instrument's notes into a mono clip of the given length,
/// deterministically for a fixed seed. Notes whose onset precedes 0 are
/// rendered as already-sounding (their envelope clock starts at the true
/// onset). Throws on pitches outside the pitched range [21,108] or on
/// overlapping identical pitches.
AudioClip render_stem_audio(const InstrumentClass& inst, const std::vector<NoteEvent>& notes,
                            double seconds, uint64_t seed);

void validate_stem_notes(const InstrumentClass& inst, const std::vector<NoteEvent>& notes);

/// Per-song musical frame shared by all of a song's parts; the shared key and
/// tempo give natural mixtures their within-song coherence.
struct SongPlan {
  double seconds = 12.0;
  double bpm = 100.0;
  int scale_root = 0;  // pitch class 0..11
  bool minor = false;
};

std::vector<NoteEvent> generate_pitched_part(const InstrumentClass& inst, const SongPlan& plan,
                                             double density, Rng& rng, bool polyphonic = true);
std::vector<NoteEvent> generate_drum_part(const InstrumentClass& inst, const SongPlan& plan,
                                          Rng& rng);
std::vector<NoteEvent> generate_vocal_part(const InstrumentClass& inst, const SongPlan& plan,
                                           Rng& rng);

}  // namespace amt::data
