#include "amt/midi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace amt::decode {

namespace {

constexpr int kTicksPerQuarter = 480;
constexpr int kTempoUsPerQuarter = 500000;  // 120 bpm
constexpr double kTicksPerSecond = 960.0;
constexpr uint8_t kVelocity = 100;
constexpr int kDrumChannel = 9;

int gm_program(const std::string& name) {
  static const std::map<std::string, int> programs = {
      {"piano", 0},      {"bass", 33},       {"guitar", 25},
      {"strings", 48},   {"brass", 61},      {"organ", 19},
      {"pipe", 73},      {"reed", 71},       {"synth_lead", 80},
      {"synth_pad", 88}, {"chromatic_percussion", 12},
      {"vocal", 52},     {"pitched_a", 80},  {"pitched_b", 71},
  };
  auto it = programs.find(name);
  return it == programs.end() ? 0 : it->second;
}

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void push_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void push_varint(std::vector<uint8_t>& out, uint32_t v) {
  uint8_t buf[5];
  int n = 0;
  buf[n++] = static_cast<uint8_t>(v & 0x7f);
  while (v >>= 7) buf[n++] = static_cast<uint8_t>(0x80 | (v & 0x7f));
  while (n--) out.push_back(buf[n]);
}

int64_t to_tick(double seconds) {
  return static_cast<int64_t>(std::llround(seconds * kTicksPerSecond));
}

struct Event {
  int64_t tick;
  int order;  // offs sort before ons at the same tick
  uint8_t status, d1, d2;
};

void append_track(std::vector<uint8_t>& out, const std::vector<uint8_t>& payload) {
  out.push_back('M');
  out.push_back('T');
  out.push_back('r');
  out.push_back('k');
  push_u32(out, static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
}

}  // namespace

std::vector<uint8_t> midi_bytes(const std::vector<NoteEvent>& notes,
                                const data::InstrumentBank& bank) {
  for (const NoteEvent& n : notes)
    if (n.pitch < 0 || n.pitch > 127)
      throw std::invalid_argument("midi: pitch " + std::to_string(n.pitch) + " out of range");

  std::vector<uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  push_u32(out, 6);
  push_u16(out, 1);  // format 1
  push_u16(out, static_cast<uint16_t>(1 + bank.size()));
  push_u16(out, kTicksPerQuarter);

  {  // tempo track
    std::vector<uint8_t> t;
    push_varint(t, 0);
    t.insert(t.end(), {0xff, 0x51, 0x03});
    t.push_back(static_cast<uint8_t>(kTempoUsPerQuarter >> 16));
    t.push_back(static_cast<uint8_t>(kTempoUsPerQuarter >> 8));
    t.push_back(static_cast<uint8_t>(kTempoUsPerQuarter));
    push_varint(t, 0);
    t.insert(t.end(), {0xff, 0x2f, 0x00});
    append_track(out, t);
  }

  int next_channel = 0;
  for (int j = 0; j < bank.size(); ++j) {
    const data::InstrumentClass& inst = bank.at(j);
    int channel;
    if (inst.percussive) {
      channel = kDrumChannel;
    } else {
      if (next_channel == kDrumChannel) ++next_channel;
      channel = std::min(next_channel++, 15);
    }
    std::vector<Event> events;
    for (const NoteEvent& n : notes) {
      if (n.instrument != j) continue;
      const int64_t on = to_tick(std::max(0.0, n.onset));
      const int64_t off = std::max(on + 1, to_tick(n.offset));
      events.push_back({on, 1, static_cast<uint8_t>(0x90 | channel),
                        static_cast<uint8_t>(n.pitch), kVelocity});
      events.push_back({off, 0, static_cast<uint8_t>(0x80 | channel),
                        static_cast<uint8_t>(n.pitch), 0});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      if (a.tick != b.tick) return a.tick < b.tick;
      if (a.order != b.order) return a.order < b.order;
      return a.d1 < b.d1;
    });

    std::vector<uint8_t> t;
    push_varint(t, 0);
    t.insert(t.end(), {0xff, 0x03});
    push_varint(t, static_cast<uint32_t>(inst.name.size()));
    t.insert(t.end(), inst.name.begin(), inst.name.end());
    push_varint(t, 0);
    t.push_back(static_cast<uint8_t>(0xc0 | channel));
    t.push_back(static_cast<uint8_t>(gm_program(inst.name)));
    int64_t cursor = 0;
    for (const Event& e : events) {
      push_varint(t, static_cast<uint32_t>(e.tick - cursor));
      cursor = e.tick;
      t.push_back(e.status);
      t.push_back(e.d1);
      t.push_back(e.d2);
    }
    push_varint(t, 0);
    t.insert(t.end(), {0xff, 0x2f, 0x00});
    append_track(out, t);
  }
  return out;
}

void write_midi(const std::string& path, const std::vector<NoteEvent>& notes,
                const data::InstrumentBank& bank) {
  const std::vector<uint8_t> bytes = midi_bytes(notes, bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("midi: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("midi: write failed for " + path);
}

namespace {

struct Cursor {
  const uint8_t* p;
  const uint8_t* end;
  uint8_t u8() {
    if (p >= end) throw std::runtime_error("midi: truncated file");
    return *p++;
  }
  uint16_t u16() { return static_cast<uint16_t>((u8() << 8) | u8()); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  uint32_t varint() {
    uint32_t v = 0;
    for (int i = 0; i < 5; ++i) {
      const uint8_t b = u8();
      v = (v << 7) | (b & 0x7f);
      if (!(b & 0x80)) return v;
    }
    throw std::runtime_error("midi: bad varint");
  }
  void skip(size_t n) {
    if (p + n > end) throw std::runtime_error("midi: truncated file");
    p += n;
  }
};

}  // namespace

std::vector<NoteEvent> midi_parse(const std::vector<uint8_t>& bytes,
                                  const data::InstrumentBank& bank) {
  Cursor c{bytes.data(), bytes.data() + bytes.size()};
  if (c.u32() != 0x4d546864u) throw std::runtime_error("midi: missing MThd");
  if (c.u32() != 6) throw std::runtime_error("midi: bad header length");
  c.u16();  // format
  const int ntracks = c.u16();
  const int division = c.u16();
  if (division <= 0 || (division & 0x8000)) throw std::runtime_error("midi: unsupported division");
  double tempo_us = kTempoUsPerQuarter;

  std::vector<NoteEvent> notes;
  for (int track = 0; track < ntracks; ++track) {
    if (c.u32() != 0x4d54726bu) throw std::runtime_error("midi: missing MTrk");
    const uint32_t len = c.u32();
    Cursor tc{c.p, c.p + len};
    c.skip(len);
    const int instrument = track - 1;  // track 0 is the tempo track
    int64_t tick = 0;
    uint8_t running = 0;
    std::map<int, std::vector<int64_t>> open;  // pitch -> onset ticks
    while (tc.p < tc.end) {
      tick += tc.varint();
      uint8_t status = *tc.p;
      if (status & 0x80) {
        tc.u8();
        if (status < 0xf0) running = status;
      } else {
        status = running;
      }
      if (status == 0xff) {
        const uint8_t type = tc.u8();
        const uint32_t mlen = tc.varint();
        if (type == 0x51 && mlen == 3) {
          tempo_us = static_cast<double>((tc.u8() << 16) | (tc.u8() << 8) | tc.u8());
        } else {
          tc.skip(mlen);
        }
        continue;
      }
      const uint8_t kind = status & 0xf0;
      if (kind == 0x90 || kind == 0x80) {
        const int pitch = tc.u8();
        const int vel = tc.u8();
        const bool is_on = (kind == 0x90 && vel > 0);
        if (is_on) {
          open[pitch].push_back(tick);
        } else if (!open[pitch].empty()) {
          const int64_t on_tick = open[pitch].front();
          open[pitch].erase(open[pitch].begin());
          if (instrument >= 0 && instrument < bank.size()) {
            const double scale = tempo_us / (1e6 * division);
            notes.push_back({instrument, pitch, on_tick * scale, tick * scale});
          }
        }
      } else if (kind == 0xc0 || kind == 0xd0) {
        tc.u8();
      } else if (kind == 0xa0 || kind == 0xb0 || kind == 0xe0) {
        tc.u8();
        tc.u8();
      } else if (status == 0xf0 || status == 0xf7) {
        tc.skip(tc.varint());
      } else {
        throw std::runtime_error("midi: unsupported event");
      }
    }
  }
  sort_notes(notes);
  return notes;
}

std::vector<NoteEvent> read_midi(const std::string& path, const data::InstrumentBank& bank) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("midi: cannot open " + path);
  std::vector<uint8_t> bytes(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return midi_parse(bytes, bank);
}

}  // namespace amt::decode
