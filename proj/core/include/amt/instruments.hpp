#pragma once

#include <string>
#include <vector>

namespace amt::data {

/// Additive-synthesis recipe for one instrument class. Pitched classes are a
/// harmonic amplitude profile plus an ADSR-style envelope (and optional
/// vibrato); percussive classes are enveloped noise bursts with a tonal body.
struct TimbreSpec {
  std::vector<double> harmonic_amps;
  double attack_s = 0.01;
  double decay_s = 0.5;
  double sustain_level = 0.7;
  double release_s = 0.03;
  double vibrato_rate_hz = 0.0;
  double vibrato_cents = 0.0;
  double noise_decay_s = 0.04;  // percussive burst decay
  double body_level = 0.8;      // percussive tonal component
};

struct InstrumentClass {
  int id = 0;
  std::string name;
  bool percussive = false;
  bool vocal = false;
  TimbreSpec timbre;
  int low_pitch = 21;
  int high_pitch = 108;
};

struct InstrumentBank {
  std::string name;
  std::vector<InstrumentClass> classes;

  int size() const { return static_cast<int>(classes.size()); }
  const InstrumentClass& at(int id) const { return classes[static_cast<size_t>(id)]; }
  /// Index of the single vocal class, or -1.
  int vocal_id() const;
  std::vector<int> non_vocal_ids() const;

  /// "duo" (pitched_a, pitched_b), "small" (+drums), "small_vocal" (+vocal)
  /// or "full" (12 ensemble classes plus vocal).
  static InstrumentBank by_name(const std::string& name);
};

/// Fixed-length normalized signature of a class's timbre, used to check that
/// class timbres are pairwise distinct.
std::vector<double> spectral_profile(const InstrumentClass& inst);

}  // namespace amt::data
