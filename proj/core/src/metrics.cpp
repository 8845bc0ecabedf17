#include "amt/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace amt::metrics {

Prf prf_from_counts(int64_t matches, int64_t n_est, int64_t n_ref) {
  Prf p;
  p.matches = matches;
  p.n_est = n_est;
  p.n_ref = n_ref;
  p.precision = n_est > 0 ? static_cast<double>(matches) / static_cast<double>(n_est) : 0.0;
  p.recall = n_ref > 0 ? static_cast<double>(matches) / static_cast<double>(n_ref) : 0.0;
  p.f1 = (p.precision + p.recall) > 0 ? 2.0 * p.precision * p.recall / (p.precision + p.recall)
                                      : 0.0;
  return p;
}

int64_t match_count(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                    double tolerance_s) {
  if (tolerance_s < 0) throw std::invalid_argument("match_count: negative tolerance");
  // bucket by pitch; within a pitch, earliest-reference greedy in estimate
  // order is optimal because each estimate's candidates form an interval
  std::map<int, std::vector<double>> ref_by_pitch;
  std::map<int, std::vector<double>> est_by_pitch;
  for (const NoteEvent& n : ref) ref_by_pitch[n.pitch].push_back(n.onset);
  for (const NoteEvent& n : est) est_by_pitch[n.pitch].push_back(n.onset);
  int64_t matches = 0;
  for (auto& [pitch, ests] : est_by_pitch) {
    auto it = ref_by_pitch.find(pitch);
    if (it == ref_by_pitch.end()) continue;
    std::vector<double>& refs = it->second;
    std::sort(refs.begin(), refs.end());
    std::sort(ests.begin(), ests.end());
    size_t next_ref = 0;
    std::vector<bool> used(refs.size(), false);
    for (double e : ests) {
      while (next_ref < refs.size() && (used[next_ref] || refs[next_ref] < e - tolerance_s))
        ++next_ref;
      if (next_ref < refs.size() && std::abs(refs[next_ref] - e) <= tolerance_s) {
        used[next_ref] = true;
        ++matches;
      }
    }
  }
  return matches;
}

Prf onset_f1(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
             double tolerance_s) {
  return prf_from_counts(match_count(ref, est, tolerance_s), static_cast<int64_t>(est.size()),
                         static_cast<int64_t>(ref.size()));
}

ScoreReport multi_instrument_onset_f1(const std::vector<NoteEvent>& ref,
                                      const std::vector<NoteEvent>& est, double tolerance_s) {
  std::map<int, std::vector<NoteEvent>> ref_by_inst, est_by_inst;
  for (const NoteEvent& n : ref) ref_by_inst[n.instrument].push_back(n);
  for (const NoteEvent& n : est) est_by_inst[n.instrument].push_back(n);

  ScoreReport report;
  report.tolerance_s = tolerance_s;
  int64_t tp = 0, n_est = 0, n_ref = 0;
  std::vector<int> instruments;
  for (const auto& [j, _] : ref_by_inst) instruments.push_back(j);
  for (const auto& [j, _] : est_by_inst)
    if (!ref_by_inst.count(j)) instruments.push_back(j);
  std::sort(instruments.begin(), instruments.end());

  double weighted_sum = 0.0;
  int weighted_n = 0;
  for (int j : instruments) {
    const auto& r = ref_by_inst[j];
    const auto& e = est_by_inst[j];
    const Prf prf = onset_f1(r, e, tolerance_s);
    report.per_instrument[j] = prf;
    tp += prf.matches;
    n_est += prf.n_est;
    n_ref += prf.n_ref;
    if (prf.n_ref > 0) {
      weighted_sum += prf.f1;
      ++weighted_n;
    }
  }
  report.pooled = prf_from_counts(tp, n_est, n_ref);
  report.instrument_weighted_f1 = weighted_n > 0 ? weighted_sum / weighted_n : 0.0;
  return report;
}

std::string report_json(const ScoreReport& report, const data::InstrumentBank& bank) {
  nlohmann::json j;
  j["tolerance_s"] = report.tolerance_s;
  j["multi_instrument_onset_f1"] = report.pooled.f1;
  j["onset_precision"] = report.pooled.precision;
  j["onset_recall"] = report.pooled.recall;
  j["instrument_weighted_f1"] = report.instrument_weighted_f1;
  j["n_ref"] = report.pooled.n_ref;
  j["n_est"] = report.pooled.n_est;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [inst, prf] : report.per_instrument) {
    const std::string name =
        inst >= 0 && inst < bank.size() ? bank.at(inst).name : std::to_string(inst);
    per[name] = {{"precision", prf.precision}, {"recall", prf.recall},      {"f1", prf.f1},
                 {"n_ref", prf.n_ref},         {"n_est", prf.n_est}};
  }
  j["per_instrument"] = per;
  return j.dump(2);
}

std::string report_table(const ScoreReport& report, const data::InstrumentBank& bank) {
  std::string out;
  char buf[64];
  auto cell = [&](const std::string& s) {
    std::snprintf(buf, sizeof(buf), " %10s", s.c_str());
    out += buf;
  };
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), " %10.3f", v);
    out += buf;
  };
  cell("");
  cell("All");
  for (int j = 0; j < bank.size(); ++j) cell(bank.at(j).name.substr(0, 10));
  out += "\n";
  cell("OnsetF1");
  num(report.pooled.f1);
  for (int j = 0; j < bank.size(); ++j) {
    auto it = report.per_instrument.find(j);
    num(it == report.per_instrument.end() ? 0.0 : it->second.f1);
  }
  out += "\n";
  return out;
}

}  // namespace amt::metrics
