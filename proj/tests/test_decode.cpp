#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "amt/decode.hpp"
#include "amt/midi.hpp"
#include "amt/targets.hpp"

using namespace amt;
using data::InstrumentBank;
using nn::Tensor;

namespace {

const InstrumentBank& small_bank() {
  static InstrumentBank bank = InstrumentBank::by_name("small");
  return bank;
}

struct Rolls {
  Tensor<double> onset{{50, 3, 128}};
  Tensor<double> frame{{50, 3, 129}};
};

}  // namespace

TEST_CASE("decode basics") {
  Rolls r;
  SUBCASE("a single onset with frame support becomes one note") {
    r.onset.at(5, 0, 60) = 0.9;
    for (int t = 5; t <= 10; ++t) r.frame.at(t, 0, 60) = 0.9;
    const auto notes = decode::decode(r.onset, r.frame, small_bank(), 0.25);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].instrument == 0);
    CHECK(notes[0].pitch == 60);
    CHECK(notes[0].onset == doctest::Approx(0.10));
    CHECK(notes[0].offset == doctest::Approx(0.22));  // first inactive frame is 11
  }
  SUBCASE("sub-threshold probabilities produce nothing") {
    for (int64_t i = 0; i < r.onset.size(); ++i) r.onset[i] = 0.2;
    for (int64_t i = 0; i < r.frame.size(); ++i) r.frame[i] = 0.2;
    CHECK(decode::decode(r.onset, r.frame, small_bank(), 0.25).empty());
  }
  SUBCASE("frame activity without an onset is not a note") {
    for (int t = 5; t <= 20; ++t) r.frame.at(t, 0, 64) = 0.95;
    CHECK(decode::decode(r.onset, r.frame, small_bank(), 0.25).empty());
  }
  SUBCASE("a re-onset closes the running note") {
    r.onset.at(5, 0, 60) = 0.9;
    r.onset.at(10, 0, 60) = 0.9;
    for (int t = 5; t <= 15; ++t) r.frame.at(t, 0, 60) = 0.9;
    const auto notes = decode::decode(r.onset, r.frame, small_bank(), 0.25);
    REQUIRE(notes.size() == 2);
    CHECK(notes[0].offset == doctest::Approx(0.20));
    CHECK(notes[1].onset == doctest::Approx(0.20));
  }
  SUBCASE("a plateau of equal onset probabilities fires once") {
    r.onset.at(5, 0, 60) = 0.5;
    r.onset.at(6, 0, 60) = 0.5;
    for (int t = 5; t <= 9; ++t) r.frame.at(t, 0, 60) = 0.9;
    const auto notes = decode::decode(r.onset, r.frame, small_bank(), 0.25);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].onset == doctest::Approx(0.10));
  }
  SUBCASE("percussive classes emit one-hop notes from onsets alone") {
    r.onset.at(7, 2, 38) = 0.9;  // drums, no frame support anywhere
    const auto notes = decode::decode(r.onset, r.frame, small_bank(), 0.25);
    REQUIRE(notes.size() == 1);
    CHECK(notes[0].offset == doctest::Approx(notes[0].onset + 0.020));
  }
  SUBCASE("threshold domain is checked") {
    CHECK_THROWS_AS(decode::decode(r.onset, r.frame, small_bank(), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(decode::decode(r.onset, r.frame, small_bank(), 1.0), std::invalid_argument);
  }
}

TEST_CASE("decoding is monotone in the threshold") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Rolls r;
    for (int64_t i = 0; i < r.onset.size(); ++i)
      r.onset[i] = rng.bernoulli(0.05) ? rng.uniform() : 0.0;
    for (int64_t i = 0; i < r.frame.size(); ++i)
      r.frame[i] = rng.bernoulli(0.15) ? rng.uniform() : 0.0;
    const auto low = decode::decode(r.onset, r.frame, small_bank(), 0.25);
    const auto high = decode::decode(r.onset, r.frame, small_bank(), 0.45);
    for (const NoteEvent& hn : high) {
      bool found = false;
      for (const NoteEvent& ln : low)
        if (ln.instrument == hn.instrument && ln.pitch == hn.pitch && ln.onset == hn.onset)
          found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("targets decode back to the source notes") {
  const InstrumentBank& bank = small_bank();
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    // clean frame-aligned notes, same-pitch notes separated by >= 2 frames
    std::vector<NoteEvent> notes;
    std::map<std::pair<int, int>, double> last_end;
    for (int n = 0; n < 12; ++n) {
      const int j = static_cast<int>(rng.uniform_int(2));  // pitched classes only
      const int pitch = 48 + static_cast<int>(rng.uniform_int(24));
      const int on = static_cast<int>(rng.uniform_int(44));
      const int len = 1 + static_cast<int>(rng.uniform_int(5));
      const double onset = on * 0.020, offset = (on + len) * 0.020;
      auto key = std::make_pair(j, pitch);
      if (last_end.count(key) && onset < last_end[key] + 0.040) continue;
      last_end[key] = offset;
      notes.push_back({j, pitch, onset, offset});
    }
    data::TrainingSample s;
    s.seconds = 1.0;
    for (int j = 0; j < 2; ++j) {
      data::Stem stem;
      stem.instrument = j;
      for (const NoteEvent& n : notes)
        if (n.instrument == j) stem.notes.push_back(n);
      stem.audio.samples.assign(16000, 0.0f);
      s.stems.push_back(stem);
    }
    s.remix();
    const auto tgt = train::build_targets<double>(s, bank, 50);
    const auto decoded = decode::decode(tgt.onset, tgt.frame, bank, 0.25);
    REQUIRE(decoded.size() == notes.size());
    sort_notes(notes);
    for (size_t i = 0; i < notes.size(); ++i) {
      CHECK(decoded[i].instrument == notes[i].instrument);
      CHECK(decoded[i].pitch == notes[i].pitch);
      CHECK(decoded[i].onset == doctest::Approx(notes[i].onset).epsilon(1e-12));
      // encode floors the offset into its frame; decode returns the frame end
      CHECK(decoded[i].offset >= notes[i].offset - 1e-9);
      CHECK(decoded[i].offset <= notes[i].offset + 0.020 + 1e-9);
    }
  }
}

TEST_CASE("midi writer") {
  const InstrumentBank& bank = small_bank();
  SUBCASE("an empty list still yields a valid file with per-instrument tracks") {
    const auto bytes = decode::midi_bytes({}, bank);
    REQUIRE(bytes.size() > 20);
    CHECK(bytes[0] == 'M');
    CHECK(bytes[1] == 'T');
    // ntracks = 1 tempo + 3 instruments
    CHECK((bytes[10] << 8 | bytes[11]) == 4);
    CHECK(decode::midi_parse(bytes, bank).empty());
  }
  SUBCASE("tick arithmetic at 120 bpm") {
    const auto bytes = decode::midi_bytes({{0, 60, 0.5, 1.0}}, bank);
    const auto back = decode::midi_parse(bytes, bank);
    REQUIRE(back.size() == 1);
    CHECK(back[0].onset == doctest::Approx(480.0 / 960.0));
    CHECK(back[0].offset == doctest::Approx(960.0 / 960.0));
  }
  SUBCASE("round trip stays within one tick") {
    Rng rng(31);
    std::vector<NoteEvent> notes;
    for (int i = 0; i < 64; ++i) {
      const int j = static_cast<int>(rng.uniform_int(3));
      const double onset = rng.uniform(0.0, 5.0);
      notes.push_back({j, 30 + static_cast<int>(rng.uniform_int(60)), onset,
                       onset + rng.uniform(0.05, 1.0)});
    }
    sort_notes(notes);
    decode::write_midi("/tmp/amt_test.mid", notes, bank);
    auto back = decode::read_midi("/tmp/amt_test.mid", bank);
    REQUIRE(back.size() == notes.size());
    for (size_t i = 0; i < notes.size(); ++i) {
      CHECK(back[i].instrument == notes[i].instrument);
      CHECK(back[i].pitch == notes[i].pitch);
      CHECK(std::abs(back[i].onset - notes[i].onset) <= 1.0 / 960.0 + 1e-9);
      CHECK(std::abs(back[i].offset - notes[i].offset) <= 1.0 / 960.0 + 1e-9);
    }
  }
  SUBCASE("drums land on channel 9") {
    const auto bytes = decode::midi_bytes({{2, 38, 0.0, 0.02}}, bank);
    bool found = false;
    for (size_t i = 0; i + 2 < bytes.size(); ++i)
      if (bytes[i] == (0x90 | 9) && bytes[i + 1] == 38 && bytes[i + 2] == 100) found = true;
    CHECK(found);
  }
  SUBCASE("pitch above 127 is rejected") {
    CHECK_THROWS_AS(decode::midi_bytes({{0, 200, 0.0, 0.1}}, bank), std::invalid_argument);
  }
}

TEST_CASE("notes jsonl round trip and validation") {
  Rng rng(37);
  std::vector<NoteEvent> notes;
  for (int i = 0; i < 1000; ++i) {
    const double onset = rng.uniform(0.0, 100.0);
    notes.push_back({static_cast<int>(rng.uniform_int(13)),
                     static_cast<int>(rng.uniform_int(128)), onset,
                     onset + rng.uniform(0.01, 2.0)});
  }
  write_notes_jsonl("/tmp/amt_notes.jsonl", notes);
  const auto back = read_notes_jsonl("/tmp/amt_notes.jsonl");
  CHECK(back == notes);

  SUBCASE("empty file") {
    write_notes_jsonl("/tmp/amt_notes_empty.jsonl", {});
    CHECK(read_notes_jsonl("/tmp/amt_notes_empty.jsonl").empty());
  }
  SUBCASE("errors carry the line number") {
    const std::string text =
        "{\"instrument\":0,\"pitch\":60,\"onset\":0.0,\"offset\":0.5}\n"
        "{\"instrument\":0,\"pitch\":500,\"onset\":0.0,\"offset\":0.5}\n";
    try {
      notes_from_jsonl(text, "probe");
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
}
