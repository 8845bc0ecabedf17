#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amt/instruments.hpp"
#include "amt/notes.hpp"

namespace amt::decode {

/// Standard MIDI File type 1: a tempo track plus one track per instrument
/// class, fixed 120 bpm, 480 ticks per quarter (960 ticks/s), constant
/// velocity 100, percussive classes on channel 9. Throws on pitch > 127.
std::vector<uint8_t> midi_bytes(const std::vector<NoteEvent>& notes,
                                const data::InstrumentBank& bank);
void write_midi(const std::string& path, const std::vector<NoteEvent>& notes,
                const data::InstrumentBank& bank);

/// Reads files produced by write_midi (and plain type 0/1 SMF with constant
/// tempo). Track order maps back to instrument classes.
std::vector<NoteEvent> read_midi(const std::string& path, const data::InstrumentBank& bank);
std::vector<NoteEvent> midi_parse(const std::vector<uint8_t>& bytes,
                                  const data::InstrumentBank& bank);

}  // namespace amt::decode
