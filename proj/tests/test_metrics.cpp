#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "amt/metrics.hpp"
#include "amt/rng.hpp"

using namespace amt;
using namespace amt::metrics;

namespace {

/// Exhaustive maximum-matching oracle for small instances.
int64_t optimal_match_count(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                            double tol) {
  const size_t n = ref.size();
  std::vector<std::vector<int>> candidates(est.size());
  for (size_t e = 0; e < est.size(); ++e)
    for (size_t r = 0; r < n; ++r)
      if (ref[r].pitch == est[e].pitch && std::abs(ref[r].onset - est[e].onset) <= tol)
        candidates[e].push_back(static_cast<int>(r));
  int64_t best = 0;
  std::vector<bool> used(n, false);
  std::function<void(size_t, int64_t)> go = [&](size_t e, int64_t acc) {
    if (e == est.size()) {
      best = std::max(best, acc);
      return;
    }
    go(e + 1, acc);  // leave est[e] unmatched
    for (int r : candidates[e])
      if (!used[static_cast<size_t>(r)]) {
        used[static_cast<size_t>(r)] = true;
        go(e + 1, acc + 1);
        used[static_cast<size_t>(r)] = false;
      }
  };
  go(0, 0);
  return best;
}

std::vector<NoteEvent> shift_all(std::vector<NoteEvent> notes, double dt) {
  for (auto& n : notes) {
    n.onset += dt;
    n.offset += dt;
  }
  return notes;
}

}  // namespace

TEST_CASE("onset_f1 basics") {
  const std::vector<NoteEvent> ref = {{0, 60, 1.0, 1.5}, {0, 64, 2.0, 2.5}};
  SUBCASE("an exact match is perfect") {
    const Prf p = onset_f1(ref, ref);
    CHECK(p.f1 == 1.0);
    CHECK(p.precision == 1.0);
    CHECK(p.recall == 1.0);
  }
  SUBCASE("an empty estimate scores zero by convention") {
    const Prf p = onset_f1(ref, {});
    CHECK(p.precision == 0.0);
    CHECK(p.recall == 0.0);
    CHECK(p.f1 == 0.0);
  }
  SUBCASE("tolerance window on one side only") {
    const std::vector<NoteEvent> est = {{0, 60, 1.04, 1.5}, {0, 60, 1.20, 1.5}};
    const Prf p = onset_f1({{0, 60, 1.00, 1.5}}, est, 0.05);
    CHECK(p.matches == 1);
    CHECK(p.precision == doctest::Approx(0.5));
    CHECK(p.recall == doctest::Approx(1.0));
    CHECK(p.f1 == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("negative tolerance is rejected") {
    CHECK_THROWS_AS(onset_f1(ref, ref, -0.1), std::invalid_argument);
  }
}

TEST_CASE("greedy matching equals the exhaustive optimum on 1000 small instances") {
  Rng rng(4242);
  for (int trial = 0; trial < 1000; ++trial) {
    const double tol = 0.05;
    auto draw_notes = [&](int max_n) {
      std::vector<NoteEvent> notes;
      const int n = static_cast<int>(rng.uniform_int(max_n + 1));
      for (int i = 0; i < n; ++i) {
        const double onset = rng.uniform(0.0, 0.8);
        notes.push_back({0, 60 + static_cast<int>(rng.uniform_int(3)), onset, onset + 0.1});
      }
      return notes;
    };
    const auto ref = draw_notes(6);
    const auto est = draw_notes(6);
    CHECK(match_count(ref, est, tol) == optimal_match_count(ref, est, tol));
  }
}

TEST_CASE("swapping ref and est transposes precision and recall") {
  Rng rng(55);
  std::vector<NoteEvent> ref, est;
  for (int i = 0; i < 20; ++i) {
    double t = rng.uniform(0.0, 3.0);
    ref.push_back({0, 60 + static_cast<int>(rng.uniform_int(5)), t, t + 0.1});
    t = rng.uniform(0.0, 3.0);
    est.push_back({0, 60 + static_cast<int>(rng.uniform_int(5)), t, t + 0.1});
  }
  const Prf a = onset_f1(ref, est);
  const Prf b = onset_f1(est, ref);
  CHECK(a.precision == doctest::Approx(b.recall));
  CHECK(a.recall == doctest::Approx(b.precision));
  CHECK(a.f1 == doctest::Approx(b.f1));
}

TEST_CASE("a uniform time shift of both sides changes nothing") {
  Rng rng(66);
  std::vector<NoteEvent> ref, est;
  for (int i = 0; i < 15; ++i) {
    double t = rng.uniform(0.0, 3.0);
    ref.push_back({1, 50 + static_cast<int>(rng.uniform_int(10)), t, t + 0.1});
    t += rng.uniform(-0.08, 0.08);
    est.push_back({1, 50 + static_cast<int>(rng.uniform_int(10)), t, t + 0.1});
  }
  const ScoreReport a = multi_instrument_onset_f1(ref, est);
  const ScoreReport b = multi_instrument_onset_f1(shift_all(ref, 11.25), shift_all(est, 11.25));
  CHECK(a.pooled.f1 == doctest::Approx(b.pooled.f1));
  CHECK(a.pooled.matches == b.pooled.matches);
}

TEST_CASE("multi-instrument pooling") {
  SUBCASE("a single instrument reduces to the plain score") {
    std::vector<NoteEvent> ref, est;
    Rng rng(77);
    for (int i = 0; i < 12; ++i) {
      const double t = rng.uniform(0.0, 3.0);
      ref.push_back({2, 60, t, t + 0.1});
      est.push_back({2, 60, t + rng.uniform(-0.1, 0.1), t + 0.2});
    }
    const ScoreReport r = multi_instrument_onset_f1(ref, est);
    const Prf plain = onset_f1(ref, est);
    CHECK(r.pooled.f1 == doctest::Approx(plain.f1));
  }
  SUBCASE("swapped instrument identities score zero") {
    std::vector<NoteEvent> ref, est;
    for (int i = 0; i < 10; ++i) {
      const double t = 0.2 * i;
      ref.push_back({0, 60, t, t + 0.1});
      ref.push_back({1, 72, t, t + 0.1});
      est.push_back({1, 60, t, t + 0.1});
      est.push_back({0, 72, t, t + 0.1});
    }
    CHECK(multi_instrument_onset_f1(ref, est).pooled.f1 == 0.0);
  }
  SUBCASE("one perfect and one missing instrument pool to 2/3") {
    std::vector<NoteEvent> ref, est;
    for (int i = 0; i < 10; ++i) {
      const double t = 0.2 * i;
      ref.push_back({0, 60, t, t + 0.1});
      ref.push_back({1, 72, t, t + 0.1});
      est.push_back({0, 60, t, t + 0.1});
    }
    const ScoreReport r = multi_instrument_onset_f1(ref, est);
    CHECK(r.pooled.precision == doctest::Approx(1.0));
    CHECK(r.pooled.recall == doctest::Approx(0.5));
    CHECK(r.pooled.f1 == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("unknown instrument ids are reported, not dropped") {
    const ScoreReport r =
        multi_instrument_onset_f1({{5, 60, 0.0, 0.1}}, {{5, 60, 0.0, 0.1}});
    CHECK(r.pooled.f1 == 1.0);
    CHECK(r.per_instrument.count(5) == 1);
  }
}

TEST_CASE("report outputs") {
  const data::InstrumentBank bank = data::InstrumentBank::by_name("small");
  std::vector<NoteEvent> ref = {{0, 60, 0.0, 0.1}, {1, 72, 0.5, 0.7}};
  const ScoreReport r = multi_instrument_onset_f1(ref, ref);
  const std::string table = report_table(r, bank);
  CHECK(table.find("pitched_a") != std::string::npos);
  CHECK(table.find("All") != std::string::npos);
  const std::string json = report_json(r, bank);
  CHECK(json.find("\"multi_instrument_onset_f1\": 1.0") != std::string::npos);
}
