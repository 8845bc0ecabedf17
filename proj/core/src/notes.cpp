#include "amt/notes.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amt {

namespace {

using nlohmann::json;

NoteEvent parse_record(const json& j, const std::string& origin, size_t line) {
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("notes: " + origin + " line " + std::to_string(line) + ": " + why);
  };
  if (!j.is_object()) fail("expected an object");
  for (const char* key : {"instrument", "pitch", "onset", "offset"})
    if (!j.contains(key)) fail(std::string("missing field '") + key + "'");
  NoteEvent n;
  n.instrument = j.at("instrument").get<int>();
  n.pitch = j.at("pitch").get<int>();
  n.onset = j.at("onset").get<double>();
  n.offset = j.at("offset").get<double>();
  if (n.pitch < 0 || n.pitch >= 128) fail("pitch " + std::to_string(n.pitch) + " outside [0,128)");
  if (n.instrument < 0) fail("negative instrument id");
  if (!(n.offset > n.onset)) fail("offset must be greater than onset");
  return n;
}

}  // namespace

std::vector<NoteEvent> notes_from_jsonl(const std::string& text, const std::string& origin) {
  std::vector<NoteEvent> notes;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("notes: " + origin + " line " + std::to_string(lineno) +
                               ": invalid JSON");
    notes.push_back(parse_record(j, origin, lineno));
  }
  return notes;
}

std::string notes_to_jsonl(const std::vector<NoteEvent>& notes) {
  std::string out;
  for (const NoteEvent& n : notes) {
    json j{{"instrument", n.instrument}, {"pitch", n.pitch}, {"onset", n.onset},
           {"offset", n.offset}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<NoteEvent> read_notes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("notes: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return notes_from_jsonl(ss.str(), path);
}

void write_notes_jsonl(const std::string& path, const std::vector<NoteEvent>& notes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("notes: cannot open " + path + " for writing");
  out << notes_to_jsonl(notes);
  if (!out) throw std::runtime_error("notes: write failed for " + path);
}

void sort_notes(std::vector<NoteEvent>& notes) {
  std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    if (a.instrument != b.instrument) return a.instrument < b.instrument;
    if (a.pitch != b.pitch) return a.pitch < b.pitch;
    return a.offset < b.offset;
  });
}

}  // namespace amt
