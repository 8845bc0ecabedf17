#pragma once

#include <map>
#include <string>
#include <vector>

#include "amt/instruments.hpp"
#include "amt/notes.hpp"

namespace amt::metrics {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t n_ref = 0;
  int64_t n_est = 0;
  int64_t matches = 0;
};

Prf prf_from_counts(int64_t matches, int64_t n_est, int64_t n_ref);

/// Count of one-to-one (pitch, |onset delta| <= tolerance) matches between
/// two single-instrument streams. Ascending-onset greedy, which is
/// count-optimal for tolerance-window matching.
int64_t match_count(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                    double tolerance_s);

/// Pitch + onset-time score for one instrument stream.
Prf onset_f1(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
             double tolerance_s = 0.05);

struct ScoreReport {
  std::map<int, Prf> per_instrument;
  Prf pooled;                           // micro-average over instrument streams
  double instrument_weighted_f1 = 0.0;  // mean per-instrument F1 where refs exist
  double tolerance_s = 0.05;
};

/// A match additionally requires the instrument to agree: streams are matched
/// per instrument, then TP/FP/FN pool into the headline score.
ScoreReport multi_instrument_onset_f1(const std::vector<NoteEvent>& ref,
                                      const std::vector<NoteEvent>& est,
                                      double tolerance_s = 0.05);

std::string report_json(const ScoreReport& report, const data::InstrumentBank& bank);
/// Aligned text table, one column per instrument class plus "All".
std::string report_table(const ScoreReport& report, const data::InstrumentBank& bank);

}  // namespace amt::metrics
