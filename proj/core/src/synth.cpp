#include "amt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace amt::data {

namespace {

constexpr double kMaxPartialHz = 7600.0;  // keep partials under Nyquist
constexpr double kStemPeak = 0.35;

double midi_hz(double pitch) { return 440.0 * std::pow(2.0, (pitch - 69.0) / 12.0); }

double envelope(const TimbreSpec& t, double rel, double note_len) {
  double a;
  if (rel < t.attack_s)
    a = rel / t.attack_s;
  else
    a = t.sustain_level + (1.0 - t.sustain_level) * std::exp(-(rel - t.attack_s) / t.decay_s);
  if (rel > note_len) a *= std::max(0.0, 1.0 - (rel - note_len) / t.release_s);
  return a;
}

void render_pitched_note(const InstrumentClass& inst, const NoteEvent& note, double amp,
                         uint64_t phase_seed, AudioClip& out) {
  const TimbreSpec& t = inst.timbre;
  const double sr = out.sample_rate;
  const double f0 = midi_hz(note.pitch);
  const double note_len = note.offset - note.onset;
  const int64_t n = static_cast<int64_t>(out.samples.size());
  const int64_t start = std::max<int64_t>(0, static_cast<int64_t>(std::floor(note.onset * sr)));
  const int64_t stop =
      std::min<int64_t>(n, static_cast<int64_t>(std::ceil((note.offset + t.release_s) * sr)));
  if (start >= stop) return;

  int n_harm = 0;
  double amp_norm = 0.0;
  for (size_t k = 0; k < t.harmonic_amps.size(); ++k) {
    if (f0 * static_cast<double>(k + 1) >= kMaxPartialHz) break;
    amp_norm += t.harmonic_amps[k];
    n_harm = static_cast<int>(k + 1);
  }
  if (n_harm == 0 || amp_norm <= 0.0) return;

  Rng rng(phase_seed);
  std::vector<double> phases(static_cast<size_t>(n_harm));
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);
  const double vib_phase = rng.uniform(0.0, 2.0 * M_PI);

  // integrate the fundamental phase so vibrato keeps harmonics locked
  double base_phase = 0.0;
  if (note.onset < 0.0) base_phase = 2.0 * M_PI * f0 * (-note.onset);
  const double dt = 1.0 / sr;
  double tsec = static_cast<double>(start) / sr;
  for (int64_t i = start; i < stop; ++i, tsec += dt) {
    const double rel = tsec - note.onset;
    double f = f0;
    if (t.vibrato_cents > 0.0)
      f *= std::pow(2.0, t.vibrato_cents / 1200.0 *
                             std::sin(2.0 * M_PI * t.vibrato_rate_hz * rel + vib_phase));
    base_phase += 2.0 * M_PI * f * dt;
    const double env = envelope(t, rel, note_len);
    if (env <= 0.0) continue;
    double v = 0.0;
    for (int k = 0; k < n_harm; ++k)
      v += t.harmonic_amps[static_cast<size_t>(k)] *
           std::sin(static_cast<double>(k + 1) * base_phase + phases[static_cast<size_t>(k)]);
    out.samples[static_cast<size_t>(i)] += static_cast<float>(amp * env * v / amp_norm);
  }
}

void render_percussive_note(const InstrumentClass& inst, const NoteEvent& note, double amp,
                            uint64_t seed, AudioClip& out) {
  const TimbreSpec& t = inst.timbre;
  const double sr = out.sample_rate;
  const int64_t n = static_cast<int64_t>(out.samples.size());
  const double dur = 4.0 * t.noise_decay_s;
  const int64_t start = std::max<int64_t>(0, static_cast<int64_t>(std::floor(note.onset * sr)));
  const int64_t stop =
      std::min<int64_t>(n, static_cast<int64_t>(std::ceil((note.onset + dur) * sr)));
  if (start >= stop) return;

  Rng rng(seed);
  // higher drum pitches sound brighter: one-pole lowpass opens with pitch
  const double bright = std::clamp((note.pitch - 35.0) / 11.0, 0.0, 1.0);
  const double alpha = 0.15 + 0.8 * bright;
  const double body_hz = std::clamp(midi_hz(note.pitch) * 1.5, 55.0, 320.0);
  const double body_amp = t.body_level * (1.0 - 0.8 * bright);
  double lp = 0.0;
  const double dt = 1.0 / sr;
  double rel = static_cast<double>(start) / sr - note.onset;
  for (int64_t i = start; i < stop; ++i, rel += dt) {
    const double noise = rng.normal();
    lp += alpha * (noise - lp);
    double v = lp * std::exp(-rel / t.noise_decay_s);
    v += body_amp * std::sin(2.0 * M_PI * body_hz * rel) * std::exp(-rel / 0.05);
    out.samples[static_cast<size_t>(i)] += static_cast<float>(amp * v);
  }
}

}  // namespace

void validate_stem_notes(const InstrumentClass& inst, const std::vector<NoteEvent>& notes) {
  std::map<int, std::vector<std::pair<double, double>>> by_pitch;
  for (const NoteEvent& note : notes) {
    if (!inst.percussive && (note.pitch < 21 || note.pitch > 108))
      throw std::invalid_argument("render_stem: pitch " + std::to_string(note.pitch) +
                                  " outside [21,108] for " + inst.name);
    if (!(note.offset > note.onset))
      throw std::invalid_argument("render_stem: non-positive note duration");
    by_pitch[note.pitch].emplace_back(note.onset, note.offset);
  }
  for (auto& [pitch, spans] : by_pitch) {
    std::sort(spans.begin(), spans.end());
    for (size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].second - 1e-9)
        throw std::invalid_argument("render_stem: overlapping notes at pitch " +
                                    std::to_string(pitch) + " on " + inst.name);
  }
}

AudioClip render_stem_audio(const InstrumentClass& inst, const std::vector<NoteEvent>& notes,
                            double seconds, uint64_t seed) {
  validate_stem_notes(inst, notes);
  AudioClip out;
  out.sample_rate = kSampleRate;
  out.samples.assign(static_cast<size_t>(std::llround(seconds * kSampleRate)), 0.0f);
  for (size_t i = 0; i < notes.size(); ++i) {
    const uint64_t note_seed = derive_seed(seed, {kStreamStem, static_cast<uint64_t>(i)});
    Rng amp_rng(derive_seed(note_seed, {7}));
    const double amp = 0.8 + 0.2 * amp_rng.uniform();
    if (inst.percussive)
      render_percussive_note(inst, notes[i], amp, note_seed, out);
    else
      render_pitched_note(inst, notes[i], amp, note_seed, out);
  }
  float peak = 0.0f;
  for (float v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0f) {
    const float g = static_cast<float>(kStemPeak) / peak;
    for (float& v : out.samples) v *= g;
  }
  return out;
}

namespace {

const int kMajorScale[5] = {0, 2, 4, 7, 9};
const int kMinorScale[5] = {0, 3, 5, 7, 10};

int snap_to_scale(int pitch, const SongPlan& plan) {
  const int* scale = plan.minor ? kMinorScale : kMajorScale;
  int best = pitch, best_d = 128;
  for (int oct = -1; oct <= 1; ++oct)
    for (int s = 0; s < 5; ++s) {
      const int base = ((pitch - plan.scale_root) / 12 + oct) * 12;
      const int cand = plan.scale_root + base + scale[s];
      const int d = std::abs(cand - pitch);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
  return best;
}

}  // namespace

std::vector<NoteEvent> generate_pitched_part(const InstrumentClass& inst, const SongPlan& plan,
                                             double density, Rng& rng, bool polyphonic) {
  std::vector<NoteEvent> notes;
  const double slot = 30.0 / plan.bpm;  // eighth note
  const int n_slots = static_cast<int>(plan.seconds / slot);
  const int mid = (inst.low_pitch + inst.high_pitch) / 2;
  int pitch = snap_to_scale(mid + static_cast<int>(rng.uniform_int(-4, 4)), plan);
  std::map<int, double> busy_until;
  for (int s = 0; s < n_slots; ++s) {
    if (!rng.bernoulli(density)) continue;
    const int step = static_cast<int>(rng.uniform_int(-5, 5));
    pitch = snap_to_scale(pitch + step, plan);
    pitch = std::clamp(pitch, inst.low_pitch, inst.high_pitch);
    const double onset = s * slot;
    const int len_slots = static_cast<int>(rng.uniform_int(1, 4));
    const double offset = std::min(plan.seconds - 0.02, onset + len_slots * slot * 0.95);
    if (offset <= onset) continue;
    auto add = [&](int p) {
      if (p < inst.low_pitch || p > inst.high_pitch) return;
      auto it = busy_until.find(p);
      if (it != busy_until.end() && it->second > onset) return;
      notes.push_back({inst.id, p, onset, offset});
      busy_until[p] = offset;
    };
    add(pitch);
    if (polyphonic && rng.bernoulli(0.25)) add(snap_to_scale(pitch + 4, plan));
    if (polyphonic && rng.bernoulli(0.15)) add(pitch + 7);
  }
  return notes;
}

std::vector<NoteEvent> generate_drum_part(const InstrumentClass& inst, const SongPlan& plan,
                                          Rng& rng) {
  std::vector<NoteEvent> notes;
  const double slot = 30.0 / plan.bpm;
  const int n_slots = static_cast<int>(plan.seconds / slot);
  const double hit_len = 0.05;
  for (int s = 0; s < n_slots; ++s) {
    const double onset = s * slot;
    if (onset + hit_len >= plan.seconds) break;
    const int beat_pos = s % 8;
    if (beat_pos == 0 && rng.bernoulli(0.9)) notes.push_back({inst.id, 36, onset, onset + hit_len});
    if (beat_pos == 4 && rng.bernoulli(0.85))
      notes.push_back({inst.id, 38, onset, onset + hit_len});
    if (rng.bernoulli(0.6)) notes.push_back({inst.id, 42, onset, onset + hit_len});
  }
  return notes;
}

std::vector<NoteEvent> generate_vocal_part(const InstrumentClass& inst, const SongPlan& plan,
                                           Rng& rng) {
  std::vector<NoteEvent> notes;
  const double slot = 60.0 / plan.bpm;  // quarter note
  const int n_slots = static_cast<int>(plan.seconds / slot);
  const int mid = (inst.low_pitch + inst.high_pitch) / 2;
  int pitch = snap_to_scale(mid + static_cast<int>(rng.uniform_int(-3, 3)), plan);
  double free_at = 0.0;
  for (int s = 0; s < n_slots; ++s) {
    const double onset = s * slot;
    if (onset < free_at || !rng.bernoulli(0.65)) continue;
    pitch = snap_to_scale(pitch + static_cast<int>(rng.uniform_int(-4, 4)), plan);
    pitch = std::clamp(pitch, inst.low_pitch, inst.high_pitch);
    const int len_slots = static_cast<int>(rng.uniform_int(1, 3));
    const double offset = std::min(plan.seconds - 0.02, onset + len_slots * slot * 0.9);
    if (offset <= onset) continue;
    notes.push_back({inst.id, pitch, onset, offset});
    free_at = offset + 0.02;
  }
  return notes;
}

}  // namespace amt::data
