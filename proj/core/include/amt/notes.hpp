#pragma once

#include <string>
#include <vector>

namespace amt {

/// A transcribed or ground-truth note. Onset may be negative for notes that
/// started before an excerpt window and are still sounding inside it.
struct NoteEvent {
  int instrument = 0;
  int pitch = 0;  // MIDI, [0, 128)
  double onset = 0.0;
  double offset = 0.0;

  bool operator==(const NoteEvent&) const = default;
};

/// One JSON object per line: {"instrument":i,"pitch":p,"onset":s,"offset":s}.
/// Floats round-trip at full precision. Malformed or out-of-range records
/// throw with the 1-based line number.
std::vector<NoteEvent> read_notes_jsonl(const std::string& path);
void write_notes_jsonl(const std::string& path, const std::vector<NoteEvent>& notes);

std::string notes_to_jsonl(const std::vector<NoteEvent>& notes);
std::vector<NoteEvent> notes_from_jsonl(const std::string& text, const std::string& origin = "");

void sort_notes(std::vector<NoteEvent>& notes);

}  // namespace amt
