#include "amt/instruments.hpp"

#include <cmath>
#include <stdexcept>

namespace amt::data {

namespace {

std::vector<double> rolloff(int n, double exponent, double even_scale = 1.0) {
  std::vector<double> amps(static_cast<size_t>(n));
  for (int k = 1; k <= n; ++k) {
    double a = 1.0 / std::pow(static_cast<double>(k), exponent);
    if (k % 2 == 0) a *= even_scale;
    amps[static_cast<size_t>(k - 1)] = a;
  }
  return amps;
}

InstrumentClass pitched(int id, std::string name, TimbreSpec t, int lo, int hi) {
  InstrumentClass c;
  c.id = id;
  c.name = std::move(name);
  c.timbre = std::move(t);
  c.low_pitch = lo;
  c.high_pitch = hi;
  return c;
}

InstrumentClass drums_class(int id) {
  InstrumentClass c;
  c.id = id;
  c.name = "drums";
  c.percussive = true;
  c.timbre.harmonic_amps = {1.0};
  c.timbre.noise_decay_s = 0.045;
  c.timbre.body_level = 0.9;
  c.low_pitch = 35;
  c.high_pitch = 46;
  return c;
}

InstrumentClass vocal_class(int id) {
  InstrumentClass c = pitched(id, "vocal",
                              {.harmonic_amps = rolloff(8, 1.3),
                               .attack_s = 0.05,
                               .decay_s = 0.6,
                               .sustain_level = 0.85,
                               .release_s = 0.06,
                               .vibrato_rate_hz = 5.5,
                               .vibrato_cents = 30.0},
                              53, 81);
  c.vocal = true;
  return c;
}

InstrumentBank make_duo() {
  InstrumentBank bank;
  bank.name = "duo";
  bank.classes.push_back(pitched(0, "pitched_a",
                                 {.harmonic_amps = rolloff(10, 1.0),
                                  .attack_s = 0.006,
                                  .decay_s = 0.5,
                                  .sustain_level = 0.55,
                                  .release_s = 0.03},
                                 48, 84));
  bank.classes.push_back(pitched(1, "pitched_b",
                                 {.harmonic_amps = rolloff(9, 1.6, 0.15),
                                  .attack_s = 0.02,
                                  .decay_s = 0.8,
                                  .sustain_level = 0.8,
                                  .release_s = 0.05},
                                 36, 76));
  return bank;
}

InstrumentBank make_small(bool with_vocal) {
  InstrumentBank bank;
  bank.name = with_vocal ? "small_vocal" : "small";
  bank.classes.push_back(pitched(0, "pitched_a",
                                 {.harmonic_amps = rolloff(10, 1.0),
                                  .attack_s = 0.006,
                                  .decay_s = 0.5,
                                  .sustain_level = 0.55,
                                  .release_s = 0.03},
                                 48, 84));
  bank.classes.push_back(pitched(1, "pitched_b",
                                 {.harmonic_amps = rolloff(9, 1.6, 0.15),
                                  .attack_s = 0.02,
                                  .decay_s = 0.8,
                                  .sustain_level = 0.8,
                                  .release_s = 0.05},
                                 36, 76));
  bank.classes.push_back(drums_class(2));
  if (with_vocal) bank.classes.push_back(vocal_class(3));
  return bank;
}

InstrumentBank make_full() {
  InstrumentBank bank;
  bank.name = "full";
  int id = 0;
  bank.classes.push_back(pitched(id++, "piano",
                                 {.harmonic_amps = rolloff(12, 1.0),
                                  .attack_s = 0.004,
                                  .decay_s = 0.9,
                                  .sustain_level = 0.18,
                                  .release_s = 0.05},
                                 21, 108));
  bank.classes.push_back(pitched(id++, "bass",
                                 {.harmonic_amps = rolloff(6, 1.4),
                                  .attack_s = 0.008,
                                  .decay_s = 0.5,
                                  .sustain_level = 0.5,
                                  .release_s = 0.04},
                                 28, 55));
  bank.classes.push_back(drums_class(id++));
  bank.classes.push_back(pitched(id++, "guitar",
                                 {.harmonic_amps = rolloff(10, 1.2, 0.7),
                                  .attack_s = 0.005,
                                  .decay_s = 0.7,
                                  .sustain_level = 0.25,
                                  .release_s = 0.04},
                                 40, 88));
  bank.classes.push_back(pitched(id++, "strings",
                                 {.harmonic_amps = rolloff(14, 0.9),
                                  .attack_s = 0.06,
                                  .decay_s = 0.8,
                                  .sustain_level = 0.8,
                                  .release_s = 0.12,
                                  .vibrato_rate_hz = 5.0,
                                  .vibrato_cents = 12.0},
                                 36, 96));
  bank.classes.push_back(pitched(id++, "brass",
                                 {.harmonic_amps = rolloff(12, 0.6),
                                  .attack_s = 0.03,
                                  .decay_s = 0.6,
                                  .sustain_level = 0.85,
                                  .release_s = 0.06},
                                 40, 84));
  bank.classes.push_back(pitched(id++, "organ",
                                 {.harmonic_amps = {1.0, 0.9, 0.0, 0.8, 0.0, 0.0, 0.0, 0.7},
                                  .attack_s = 0.002,
                                  .decay_s = 1.0,
                                  .sustain_level = 1.0,
                                  .release_s = 0.02},
                                 36, 96));
  bank.classes.push_back(pitched(id++, "pipe",
                                 {.harmonic_amps = rolloff(6, 2.2),
                                  .attack_s = 0.04,
                                  .decay_s = 0.8,
                                  .sustain_level = 0.9,
                                  .release_s = 0.05,
                                  .vibrato_rate_hz = 4.5,
                                  .vibrato_cents = 8.0},
                                 60, 96));
  bank.classes.push_back(pitched(id++, "reed",
                                 {.harmonic_amps = rolloff(11, 0.9, 0.3),
                                  .attack_s = 0.02,
                                  .decay_s = 0.7,
                                  .sustain_level = 0.8,
                                  .release_s = 0.05},
                                 46, 88));
  bank.classes.push_back(pitched(id++, "synth_lead",
                                 {.harmonic_amps = rolloff(16, 1.0),
                                  .attack_s = 0.002,
                                  .decay_s = 0.8,
                                  .sustain_level = 0.9,
                                  .release_s = 0.03},
                                 48, 96));
  bank.classes.push_back(pitched(id++, "synth_pad",
                                 {.harmonic_amps = rolloff(10, 1.1),
                                  .attack_s = 0.15,
                                  .decay_s = 1.2,
                                  .sustain_level = 0.9,
                                  .release_s = 0.3,
                                  .vibrato_rate_hz = 0.3,
                                  .vibrato_cents = 8.0},
                                 36, 84));
  bank.classes.push_back(pitched(id++, "chromatic_percussion",
                                 {.harmonic_amps = {1.0, 0.05, 0.3, 0.05},
                                  .attack_s = 0.002,
                                  .decay_s = 0.25,
                                  .sustain_level = 0.02,
                                  .release_s = 0.05},
                                 48, 96));
  bank.classes.push_back(vocal_class(id++));
  return bank;
}

}  // namespace

int InstrumentBank::vocal_id() const {
  for (const auto& c : classes)
    if (c.vocal) return c.id;
  return -1;
}

std::vector<int> InstrumentBank::non_vocal_ids() const {
  std::vector<int> ids;
  for (const auto& c : classes)
    if (!c.vocal) ids.push_back(c.id);
  return ids;
}

InstrumentBank InstrumentBank::by_name(const std::string& name) {
  if (name == "duo") return make_duo();
  if (name == "small") return make_small(false);
  if (name == "small_vocal") return make_small(true);
  if (name == "full") return make_full();
  throw std::invalid_argument("unknown instrument bank: " + name);
}

std::vector<double> spectral_profile(const InstrumentClass& inst) {
  std::vector<double> prof(20, 0.0);
  if (inst.percussive) {
    // noise signature lives past the harmonic slots
    prof[16] = 1.0;
    prof[17] = inst.timbre.noise_decay_s;
    prof[18] = inst.timbre.body_level;
  } else {
    double norm = 0.0;
    for (double a : inst.timbre.harmonic_amps) norm += a * a;
    norm = std::sqrt(std::max(norm, 1e-12));
    for (size_t k = 0; k < inst.timbre.harmonic_amps.size() && k < 16; ++k)
      prof[k] = inst.timbre.harmonic_amps[k] / norm;
    prof[19] = inst.timbre.attack_s;
  }
  return prof;
}

}  // namespace amt::data
