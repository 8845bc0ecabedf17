#include "amt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "amt/synth.hpp"

namespace amt::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::multi_track: return "multi_track";
    case SourceKind::single_track: return "single_track";
    case SourceKind::vocal_mixture: return "vocal_mixture";
  }
  return "multi_track";
}

SourceKind source_kind_from_string(const std::string& s) {
  if (s == "multi_track") return SourceKind::multi_track;
  if (s == "single_track") return SourceKind::single_track;
  if (s == "vocal_mixture") return SourceKind::vocal_mixture;
  throw std::invalid_argument("unknown source kind: " + s);
}

std::vector<int> TrainingSample::template_ids() const {
  std::vector<int> ids;
  for (const Stem& s : stems) ids.push_back(s.instrument);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

bool TrainingSample::has_unlabeled() const {
  for (const Stem& s : stems)
    if (!s.labeled) return true;
  return false;
}

void TrainingSample::remix() {
  const size_t n = stems.empty()
                       ? static_cast<size_t>(std::llround(seconds * kSampleRate))
                       : stems.front().audio.samples.size();
  mixture.sample_rate = kSampleRate;
  mixture.samples.assign(n, 0.0f);
  for (const Stem& s : stems) {
    if (s.audio.samples.size() != n)
      throw std::invalid_argument("remix: stems have differing lengths");
    for (size_t i = 0; i < n; ++i) mixture.samples[i] += s.audio.samples[i];
  }
  float peak = 0.0f;
  for (float v : mixture.samples) peak = std::max(peak, std::abs(v));
  if (peak > 1.0f) {
    const float g = 1.0f / peak;
    for (Stem& s : stems)
      for (float& v : s.audio.samples) v *= g;
    for (float& v : mixture.samples) v *= g;
  }
}

std::vector<bool> instrument_mask(const TrainingSample& sample, const InstrumentBank& bank) {
  std::vector<bool> mask(static_cast<size_t>(bank.size()), true);
  if (sample.has_unlabeled()) {
    const int vocal = bank.vocal_id();
    for (int j = 0; j < bank.size(); ++j) mask[static_cast<size_t>(j)] = (j == vocal);
  }
  return mask;
}

Stem render_stem(const InstrumentClass& inst, std::vector<NoteEvent> notes, double seconds,
                 uint64_t seed) {
  Stem stem;
  stem.instrument = inst.id;
  stem.render_seed = seed;
  stem.audio = render_stem_audio(inst, notes, seconds, seed);
  stem.notes = std::move(notes);
  sort_notes(stem.notes);
  return stem;
}

TrainingSample generate_song(const InstrumentBank& bank, SourceKind kind, uint64_t song_id,
                             uint64_t seed, double seconds) {
  Rng rng(derive_seed(seed, {kStreamSong, song_id}));
  SongPlan plan;
  plan.seconds = seconds;
  plan.bpm = rng.uniform(72.0, 140.0);
  plan.scale_root = static_cast<int>(rng.uniform_int(12));
  plan.minor = rng.bernoulli(0.4);

  TrainingSample sample;
  sample.kind = kind;
  sample.song_id = song_id;
  sample.seconds = seconds;

  const std::vector<int> non_vocal = bank.non_vocal_ids();
  auto stem_seed = [&](int slot) {
    return derive_seed(seed, {kStreamStem, song_id, static_cast<uint64_t>(slot)});
  };

  auto part_for = [&](const InstrumentClass& inst, double density) {
    if (inst.percussive) return generate_drum_part(inst, plan, rng);
    if (inst.vocal) return generate_vocal_part(inst, plan, rng);
    return generate_pitched_part(inst, plan, density, rng);
  };

  switch (kind) {
    case SourceKind::multi_track: {
      // template: random subset of non-vocal classes, at least two
      std::vector<int> pool = non_vocal;
      const int want = static_cast<int>(
          rng.uniform_int(2, std::min<int64_t>(4, static_cast<int64_t>(pool.size()))));
      std::vector<int> chosen;
      for (int i = 0; i < want; ++i) {
        const size_t idx = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(pool.size())));
        chosen.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<long>(idx));
      }
      std::sort(chosen.begin(), chosen.end());
      int slot = 0;
      for (int id : chosen) {
        const InstrumentClass& inst = bank.at(id);
        sample.stems.push_back(
            render_stem(inst, part_for(inst, 0.45), seconds, stem_seed(slot++)));
      }
      break;
    }
    case SourceKind::single_track: {
      std::vector<int> pitched;
      for (int id : non_vocal)
        if (!bank.at(id).percussive) pitched.push_back(id);
      if (pitched.empty()) throw std::invalid_argument("generate_song: no pitched classes");
      const int id = pitched[static_cast<size_t>(
          rng.uniform_int(static_cast<int64_t>(pitched.size())))];
      const InstrumentClass& inst = bank.at(id);
      sample.stems.push_back(
          render_stem(inst, generate_pitched_part(inst, plan, 0.6, rng, true), seconds,
                      stem_seed(0)));
      break;
    }
    case SourceKind::vocal_mixture: {
      const int vocal = bank.vocal_id();
      if (vocal < 0)
        throw std::invalid_argument("generate_song: bank '" + bank.name + "' has no vocal class");
      sample.stems.push_back(render_stem(bank.at(vocal),
                                         generate_vocal_part(bank.at(vocal), plan, rng), seconds,
                                         stem_seed(0)));
      // accompaniment: several non-vocal parts flattened into one unlabeled stem
      std::vector<int> pool = non_vocal;
      const int want = static_cast<int>(
          rng.uniform_int(1, std::min<int64_t>(3, static_cast<int64_t>(pool.size()))));
      Stem accomp;
      accomp.labeled = false;
      accomp.render_seed = stem_seed(1);
      accomp.audio.sample_rate = kSampleRate;
      accomp.audio.samples.assign(static_cast<size_t>(std::llround(seconds * kSampleRate)), 0.0f);
      for (int i = 0; i < want; ++i) {
        const size_t idx = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(pool.size())));
        const InstrumentClass& inst = bank.at(pool[idx]);
        pool.erase(pool.begin() + static_cast<long>(idx));
        if (i == 0) accomp.instrument = inst.id;
        const AudioClip part = render_stem_audio(
            inst, part_for(inst, 0.4), seconds,
            derive_seed(accomp.render_seed, {static_cast<uint64_t>(i)}));
        for (size_t s = 0; s < accomp.audio.samples.size(); ++s)
          accomp.audio.samples[s] += part.samples[s];
      }
      sample.stems.push_back(std::move(accomp));
      break;
    }
  }
  sample.remix();
  return sample;
}

TrainingSample sample_excerpt(const TrainingSample& song, double window_seconds, uint64_t seed) {
  if (song.seconds < window_seconds - 1e-9)
    throw std::invalid_argument("sample_excerpt: song shorter than the window");
  Rng rng(derive_seed(seed, {kStreamExcerpt, song.song_id}));
  const int64_t win = static_cast<int64_t>(std::llround(window_seconds * kSampleRate));
  const int64_t total = static_cast<int64_t>(song.mixture.samples.size());
  const int64_t max_start = std::max<int64_t>(0, total - win);
  const int64_t start = max_start == 0
                            ? 0
                            : static_cast<int64_t>(rng.uniform() * static_cast<double>(max_start));
  const double t0 = static_cast<double>(start) / kSampleRate;
  const double t1 = t0 + window_seconds;

  TrainingSample out;
  out.kind = song.kind;
  out.song_id = song.song_id;
  out.seconds = window_seconds;
  for (const Stem& s : song.stems) {
    Stem c;
    c.instrument = s.instrument;
    c.labeled = s.labeled;
    c.render_seed = s.render_seed;
    c.audio.sample_rate = kSampleRate;
    c.audio.samples.assign(s.audio.samples.begin() + start, s.audio.samples.begin() + start + win);
    for (const NoteEvent& n : s.notes) {
      if (n.offset <= t0 || n.onset >= t1) continue;
      NoteEvent local = n;
      local.onset = n.onset - t0;  // may be negative for sustained-in notes
      local.offset = std::min(n.offset - t0, window_seconds);
      c.notes.push_back(local);
    }
    out.stems.push_back(std::move(c));
  }
  out.remix();
  return out;
}

TrainingSample pitch_shift(const TrainingSample& sample, const InstrumentBank& bank,
                           int semitones) {
  if (semitones == 0) return sample;
  TrainingSample out = sample;
  bool changed = false;
  for (Stem& s : out.stems) {
    const InstrumentClass& inst = bank.at(s.instrument);
    if (inst.percussive || !s.labeled) continue;
    for (NoteEvent& n : s.notes) {
      n.pitch += semitones;
      if (n.pitch < 21 || n.pitch > 108)
        throw std::invalid_argument("pitch_shift: pitch " + std::to_string(n.pitch) +
                                    " outside [21,108]");
    }
    s.audio = render_stem_audio(inst, s.notes, out.seconds, s.render_seed);
    changed = true;
  }
  if (changed) out.remix();
  return out;
}

int pick_pitch_shift(const TrainingSample& sample, const InstrumentBank& bank, int max_abs,
                     Rng& rng) {
  int lo = -max_abs, hi = max_abs;
  for (const Stem& s : sample.stems) {
    const InstrumentClass& inst = bank.at(s.instrument);
    if (inst.percussive || !s.labeled) continue;
    for (const NoteEvent& n : s.notes) {
      lo = std::max(lo, 21 - n.pitch);
      hi = std::min(hi, 108 - n.pitch);
    }
  }
  if (lo > hi) return 0;
  return static_cast<int>(rng.uniform_int(lo, hi));
}

TrainingSample random_mix(const TrainingSample& sample, const Dataset& pool,
                          const InstrumentBank& bank, const AugmentConfig& cfg,
                          double window_seconds, uint64_t seed, MixStats* stats) {
  Rng rng(derive_seed(seed, {kStreamRandomMix, sample.song_id}));
  MixStats local;
  MixStats& st = stats ? *stats : local;
  TrainingSample out = sample;

  auto donor_stem_seed = [&](uint64_t slot) {
    return derive_seed(seed, {kStreamRandomMix, sample.song_id, 0xD0, slot});
  };

  switch (sample.kind) {
    case SourceKind::multi_track: {
      for (size_t i = 0; i < out.stems.size(); ++i) {
        const double draw = rng.uniform();
        if (draw >= cfg.stem_replace_prob) continue;
        const int inst = out.stems[i].instrument;
        const std::vector<size_t> donors = pool.songs_with_class(inst, sample.song_id);
        if (donors.empty()) {
          ++st.fallbacks;
          continue;
        }
        const size_t donor_idx =
            donors[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(donors.size())))];
        const TrainingSample donor =
            sample_excerpt(pool.load_song(donor_idx), window_seconds, donor_stem_seed(i));
        bool found = false;
        for (const Stem& ds : donor.stems)
          if (ds.instrument == inst) {
            out.stems[i] = ds;
            found = true;
            break;
          }
        if (found)
          ++st.replaced;
        else
          ++st.fallbacks;
      }
      break;
    }
    case SourceKind::single_track: {
      const int solo = out.stems.empty() ? -1 : out.stems.front().instrument;
      const std::vector<size_t> donors =
          pool.songs_of_kind(SourceKind::multi_track, sample.song_id);
      if (donors.empty()) {
        ++st.fallbacks;
        break;
      }
      const size_t donor_idx =
          donors[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(donors.size())))];
      const TrainingSample donor =
          sample_excerpt(pool.load_song(donor_idx), window_seconds, donor_stem_seed(0));
      for (const Stem& ds : donor.stems) {
        if (ds.instrument == solo) continue;  // solo's class is removed from the background
        out.stems.push_back(ds);
        ++st.replaced;
      }
      break;
    }
    case SourceKind::vocal_mixture: {
      const double draw = rng.uniform();
      if (draw >= cfg.vocal_background_prob) break;
      const bool use_unlabeled = rng.bernoulli(0.5);
      const int vocal = bank.vocal_id();
      std::vector<Stem> kept;
      for (Stem& s : out.stems)
        if (s.instrument == vocal && s.labeled) kept.push_back(std::move(s));
      out.stems = std::move(kept);
      if (use_unlabeled) {
        const std::vector<size_t> donors =
            pool.songs_of_kind(SourceKind::vocal_mixture, sample.song_id);
        bool done = false;
        if (!donors.empty()) {
          const size_t donor_idx =
              donors[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(donors.size())))];
          const TrainingSample donor =
              sample_excerpt(pool.load_song(donor_idx), window_seconds, donor_stem_seed(1));
          for (const Stem& ds : donor.stems)
            if (!ds.labeled) {
              out.stems.push_back(ds);
              done = true;
              break;
            }
        }
        if (done)
          st.vocal_branch = 2;
        else
          ++st.fallbacks;
      } else {
        const std::vector<size_t> donors =
            pool.songs_of_kind(SourceKind::multi_track, sample.song_id);
        if (donors.empty()) {
          ++st.fallbacks;
          break;
        }
        const size_t donor_idx =
            donors[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(donors.size())))];
        const TrainingSample donor =
            sample_excerpt(pool.load_song(donor_idx), window_seconds, donor_stem_seed(2));
        for (const Stem& ds : donor.stems) {
          if (ds.instrument == vocal) continue;
          out.stems.push_back(ds);
        }
        st.vocal_branch = 1;
      }
      break;
    }
  }
  out.remix();
  return out;
}

// ---------------------------------------------------------------------------
// manifest-backed dataset directory
// ---------------------------------------------------------------------------

void Dataset::synthesize(const std::string& dir, const SynthesisSpec& spec, bool force) {
  fs::path root(dir);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force)
      throw std::runtime_error("dataset: " + dir + " is not empty (use force to overwrite)");
    fs::remove_all(root);
  }
  fs::create_directories(root / "stems");
  fs::create_directories(root / "notes");

  const InstrumentBank bank = InstrumentBank::by_name(spec.bank);
  json manifest;
  manifest["version"] = 1;
  manifest["seed"] = spec.seed;
  manifest["bank"] = spec.bank;
  manifest["sample_rate"] = kSampleRate;
  manifest["song_seconds"] = spec.song_seconds;
  manifest["songs"] = json::array();

  for (int i = 0; i < spec.songs; ++i) {
    SourceKind kind;
    if (spec.kind == "mixed") {
      // 2:1:1 multi/single/vocal rotation (vocal only when the bank allows it)
      const int r = i % 4;
      kind = r < 2 ? SourceKind::multi_track
                   : (r == 2 ? SourceKind::single_track : SourceKind::vocal_mixture);
      if (kind == SourceKind::vocal_mixture && bank.vocal_id() < 0)
        kind = SourceKind::multi_track;
    } else {
      kind = source_kind_from_string(spec.kind);
    }
    const uint64_t song_seed = derive_seed(spec.seed, {kStreamSong, static_cast<uint64_t>(i)});
    const TrainingSample song =
        generate_song(bank, kind, static_cast<uint64_t>(i), song_seed, spec.song_seconds);

    json jsong;
    jsong["id"] = i;
    jsong["kind"] = to_string(kind);
    jsong["seed"] = song_seed;
    jsong["seconds"] = spec.song_seconds;
    jsong["stems"] = json::array();
    char buf[64];
    for (size_t s = 0; s < song.stems.size(); ++s) {
      const Stem& stem = song.stems[s];
      std::snprintf(buf, sizeof(buf), "%05d_%zu", i, s);
      const std::string base(buf);
      const std::string wav = "stems/" + base + ".wav";
      write_wav((root / wav).string(), stem.audio);
      json jstem;
      jstem["instrument"] = stem.instrument;
      jstem["labeled"] = stem.labeled;
      jstem["audio"] = wav;
      jstem["render_seed"] = stem.render_seed;
      if (stem.labeled) {
        const std::string notes = "notes/" + base + ".jsonl";
        write_notes_jsonl((root / notes).string(), stem.notes);
        jstem["notes"] = notes;
      }
      jsong["stems"].push_back(jstem);
    }
    manifest["songs"].push_back(jsong);
  }

  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Dataset Dataset::open(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("dataset: no manifest.json in " + dir);
  json manifest = json::parse(in);

  Dataset ds;
  ds.dir_ = dir;
  ds.seed_ = manifest.at("seed").get<uint64_t>();
  ds.song_seconds_ = manifest.at("song_seconds").get<double>();
  ds.bank_ = InstrumentBank::by_name(manifest.at("bank").get<std::string>());
  for (const json& jsong : manifest.at("songs")) {
    SongInfo info;
    info.id = jsong.at("id").get<uint64_t>();
    info.kind = source_kind_from_string(jsong.at("kind").get<std::string>());
    info.seed = jsong.at("seed").get<uint64_t>();
    info.seconds = jsong.at("seconds").get<double>();
    for (const json& jstem : jsong.at("stems")) {
      StemInfo si;
      si.instrument = jstem.at("instrument").get<int>();
      si.labeled = jstem.at("labeled").get<bool>();
      si.audio_path = jstem.at("audio").get<std::string>();
      si.render_seed = jstem.at("render_seed").get<uint64_t>();
      if (jstem.contains("notes")) si.notes_path = jstem.at("notes").get<std::string>();
      info.stems.push_back(std::move(si));
    }
    ds.songs_.push_back(std::move(info));
  }
  return ds;
}

TrainingSample Dataset::load_song(size_t i) const {
  {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto it = cache_.find(i);
    if (it != cache_.end()) return *it->second;
  }
  const SongInfo& info = songs_.at(i);
  TrainingSample sample;
  sample.kind = info.kind;
  sample.song_id = info.id;
  sample.seconds = info.seconds;
  for (const StemInfo& si : info.stems) {
    Stem stem;
    stem.instrument = si.instrument;
    stem.labeled = si.labeled;
    stem.render_seed = si.render_seed;
    stem.audio = read_wav((fs::path(dir_) / si.audio_path).string());
    if (si.labeled && !si.notes_path.empty())
      stem.notes = read_notes_jsonl((fs::path(dir_) / si.notes_path).string());
    sample.stems.push_back(std::move(stem));
  }
  sample.remix();
  auto ptr = std::make_shared<const TrainingSample>(std::move(sample));
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  cache_[i] = ptr;
  return *ptr;
}

std::vector<size_t> Dataset::songs_with_class(int instrument, uint64_t excluding_song_id) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < songs_.size(); ++i) {
    if (songs_[i].id == excluding_song_id) continue;
    for (const StemInfo& s : songs_[i].stems)
      if (s.instrument == instrument && s.labeled) {
        out.push_back(i);
        break;
      }
  }
  return out;
}

std::vector<size_t> Dataset::songs_of_kind(SourceKind kind, uint64_t excluding_song_id) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < songs_.size(); ++i)
    if (songs_[i].kind == kind && songs_[i].id != excluding_song_id) out.push_back(i);
  return out;
}

}  // namespace amt::data
