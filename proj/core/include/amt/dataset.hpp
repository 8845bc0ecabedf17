#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "amt/audio.hpp"
#include "amt/instruments.hpp"
#include "amt/notes.hpp"
#include "amt/rng.hpp"

namespace amt::data {

enum class SourceKind { multi_track, single_track, vocal_mixture };

std::string to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& s);

/// One instrument's audio within a sample. Unlabeled stems carry no notes and
/// must be loss-masked downstream.
struct Stem {
  int instrument = 0;
  AudioClip audio;
  std::vector<NoteEvent> notes;
  bool labeled = true;
  uint64_t render_seed = 0;
};

struct TrainingSample {
  std::vector<Stem> stems;
  AudioClip mixture;
  SourceKind kind = SourceKind::multi_track;
  uint64_t song_id = 0;
  double seconds = 0.0;

  /// Instrumentation template: sorted unique instrument ids present.
  std::vector<int> template_ids() const;
  bool has_unlabeled() const;

  /// Re-sums the mixture and, if it peaks above 1, scales every stem down by
  /// the same factor so mixture == sum(stems) holds with peak <= 1.
  void remix();
};

/// Loss mask: true entries contribute to the loss. All true unless the
/// sample carries unlabeled audio, in which case only the vocal class counts.
std::vector<bool> instrument_mask(const TrainingSample& sample, const InstrumentBank& bank);

struct AugmentConfig {
  double stem_replace_prob = 0.25;      // p, multi-track stem replacement
  double vocal_background_prob = 0.50;  // q, vocal-mixture background replacement
  int pitch_shift_max = 3;
  double pitch_shift_prob = 1.0;
};

Stem render_stem(const InstrumentClass& inst, std::vector<NoteEvent> notes, double seconds,
                 uint64_t seed);

TrainingSample generate_song(const InstrumentBank& bank, SourceKind kind, uint64_t song_id,
                             uint64_t seed, double seconds);

/// Crops every stem to the same random window. Notes still sounding at the
/// window start keep their (negative) onset; offsets are truncated to the
/// window.
TrainingSample sample_excerpt(const TrainingSample& song, double window_seconds, uint64_t seed);

/// Transposes every labeled non-percussive stem by re-rendering it with the
/// same per-stem seed; percussive and unlabeled stems pass through untouched.
/// Throws when a transposed pitch leaves [21,108]; semitones == 0 is the
/// identity.
TrainingSample pitch_shift(const TrainingSample& sample, const InstrumentBank& bank,
                           int semitones);

/// Largest-magnitude legal shift drawn uniformly from [-max_abs, max_abs],
/// clamped so every labeled pitched note stays in range.
int pick_pitch_shift(const TrainingSample& sample, const InstrumentBank& bank, int max_abs,
                     Rng& rng);

struct MixStats {
  int replaced = 0;
  int fallbacks = 0;
  int vocal_branch = 0;  // 0 none, 1 template background, 2 unlabeled accompaniment
};

class Dataset;

/// The three random-mixing treatments keyed by the sample's source kind.
TrainingSample random_mix(const TrainingSample& sample, const Dataset& pool,
                          const InstrumentBank& bank, const AugmentConfig& cfg,
                          double window_seconds, uint64_t seed, MixStats* stats = nullptr);

struct StemInfo {
  int instrument = 0;
  bool labeled = true;
  std::string audio_path;
  std::string notes_path;  // empty when unlabeled
  uint64_t render_seed = 0;
};

struct SongInfo {
  uint64_t id = 0;
  SourceKind kind = SourceKind::multi_track;
  uint64_t seed = 0;
  double seconds = 0.0;
  std::vector<StemInfo> stems;
};

struct SynthesisSpec {
  std::string bank = "small";
  std::string kind = "multi_track";  // or single_track, vocal_mixture, mixed
  int songs = 10;
  double song_seconds = 12.0;
  uint64_t seed = 0;
};

/// Manifest-backed dataset directory: manifest.json + stems/*.wav +
/// notes/*.jsonl. Loaded songs are cached in memory.
class Dataset {
 public:
  static void synthesize(const std::string& dir, const SynthesisSpec& spec, bool force = false);
  static Dataset open(const std::string& dir);

  size_t size() const { return songs_.size(); }
  const SongInfo& info(size_t i) const { return songs_[i]; }
  const InstrumentBank& bank() const { return bank_; }
  uint64_t seed() const { return seed_; }
  const std::string& dir() const { return dir_; }

  TrainingSample load_song(size_t i) const;

  /// Song indices (not ids) whose template contains the class, excluding one
  /// song id.
  std::vector<size_t> songs_with_class(int instrument, uint64_t excluding_song_id) const;
  std::vector<size_t> songs_of_kind(SourceKind kind, uint64_t excluding_song_id) const;

 private:
  std::string dir_;
  uint64_t seed_ = 0;
  double song_seconds_ = 0.0;
  InstrumentBank bank_;
  std::vector<SongInfo> songs_;
  mutable std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
  mutable std::unordered_map<size_t, std::shared_ptr<const TrainingSample>> cache_;
};

}  // namespace amt::data
