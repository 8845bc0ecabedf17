#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "amt/loss.hpp"
#include "amt/trainer.hpp"

using namespace amt;
using namespace amt::train;
using data::Dataset;
using data::InstrumentBank;
using data::SourceKind;
using data::SynthesisSpec;
using data::TrainingSample;
using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

model::ModelConfig tiny_duo_config() {
  model::ModelConfig cfg;
  cfg.bank = "duo";
  cfg.instruments = 2;
  cfg.latent_dim = 16;
  cfg.heads = 4;
  cfg.conv_channels = {4, 8, 16};
  cfg.spec_bins = 128;
  cfg.window_seconds = 0.5;  // 25 frames
  cfg.gru_hidden = 16;
  cfg.dropout = 0.0;
  cfg.validate();
  return cfg;
}

const char* kTinyDataDir = "/tmp/amt_train_ds";

const Dataset& tiny_dataset() {
  static bool made = false;
  if (!made) {
    SynthesisSpec spec;
    spec.bank = "duo";
    spec.kind = "multi_track";
    spec.songs = 6;
    spec.song_seconds = 2.0;
    spec.seed = 77;
    Dataset::synthesize(kTinyDataDir, spec, true);
    made = true;
  }
  static Dataset ds = Dataset::open(kTinyDataDir);
  return ds;
}

}  // namespace

TEST_CASE("build_targets") {
  const InstrumentBank bank = InstrumentBank::by_name("small");
  SUBCASE("empty sample: zero onsets, silence channel on, all masks true") {
    TrainingSample s;
    s.seconds = 1.0;
    s.remix();
    const auto tgt = build_targets<double>(s, bank, 50);
    for (int64_t i = 0; i < tgt.onset.size(); ++i) CHECK(tgt.onset[i] == 0.0);
    for (int t = 0; t < 50; ++t)
      for (int j = 0; j < 3; ++j) {
        CHECK(tgt.frame.at(t, j, 128) == 1.0);
        for (int p = 0; p < 128; ++p) CHECK(tgt.frame.at(t, j, p) == 0.0);
      }
    for (bool m : tgt.mask) CHECK(m);
  }
  SUBCASE("a note paints one onset frame and an inclusive frame run") {
    TrainingSample s;
    s.seconds = 1.0;
    s.stems.push_back(data::render_stem(bank.at(0), {{0, 60, 0.10, 0.20}}, 1.0, 3));
    s.remix();
    const auto tgt = build_targets<double>(s, bank, 50);
    CHECK(tgt.onset.at(5, 0, 60) == 1.0);
    double onset_sum = 0;
    for (int64_t i = 0; i < tgt.onset.size(); ++i) onset_sum += tgt.onset[i];
    CHECK(onset_sum == 1.0);
    for (int t = 5; t <= 10; ++t) {
      CHECK(tgt.frame.at(t, 0, 60) == 1.0);
      CHECK(tgt.frame.at(t, 0, 128) == 0.0);
    }
    CHECK(tgt.frame.at(4, 0, 60) == 0.0);
    CHECK(tgt.frame.at(11, 0, 60) == 0.0);
  }
  SUBCASE("a sustained-in note activates frames without an onset") {
    TrainingSample s;
    s.seconds = 1.0;
    data::Stem stem;
    stem.instrument = 0;
    stem.notes = {{0, 72, -0.05, 0.30}};
    stem.audio.samples.assign(16000, 0.0f);
    s.stems.push_back(stem);
    s.remix();
    const auto tgt = build_targets<double>(s, bank, 50);
    for (int64_t i = 0; i < tgt.onset.size(); ++i) CHECK(tgt.onset[i] == 0.0);
    for (int t = 0; t <= 15; ++t) CHECK(tgt.frame.at(t, 0, 72) == 1.0);
  }
  SUBCASE("percussive notes are one frame wide") {
    TrainingSample s;
    s.seconds = 1.0;
    s.stems.push_back(data::render_stem(bank.at(2), {{2, 38, 0.10, 0.40}}, 1.0, 4));
    s.remix();
    const auto tgt = build_targets<double>(s, bank, 50);
    CHECK(tgt.frame.at(5, 2, 38) == 1.0);
    CHECK(tgt.frame.at(6, 2, 38) == 0.0);
  }
  SUBCASE("unlabeled audio masks everything but the vocal class") {
    const InstrumentBank vb = InstrumentBank::by_name("small_vocal");
    TrainingSample s;
    s.seconds = 1.0;
    data::Stem accomp;
    accomp.instrument = 0;
    accomp.labeled = false;
    accomp.audio.samples.assign(16000, 0.0f);
    s.stems.push_back(accomp);
    s.remix();
    const auto tgt = build_targets<double>(s, vb, 50);
    for (int j = 0; j < vb.size(); ++j) CHECK(tgt.mask[j] == vb.at(j).vocal);
  }
}

TEST_CASE("multitask loss") {
  const InstrumentBank bank = InstrumentBank::by_name("small");
  const int T = 10, J = 3;
  TargetRoll<double> tgt;
  tgt.onset = Tensor<double>({T, J, 128});
  tgt.frame = Tensor<double>({T, J, 129});
  tgt.mask.assign(J, true);
  Rng rng(5);
  for (int64_t i = 0; i < tgt.onset.size(); ++i) tgt.onset[i] = rng.bernoulli(0.05) ? 1.0 : 0.0;
  for (int64_t i = 0; i < tgt.frame.size(); ++i) tgt.frame[i] = rng.bernoulli(0.2) ? 1.0 : 0.0;

  SUBCASE("an exact prediction scores (numerically) zero") {
    Graph<double> g;
    auto res = multitask_loss<double>(g.constant(tgt.onset), g.constant(tgt.frame), tgt);
    CHECK(res.report.total < 1e-5);
  }
  SUBCASE("flat 0.5 predictions cost ln 2 per term") {
    Graph<double> g;
    auto res = multitask_loss<double>(g.constant(Tensor<double>::full({T, J, 128}, 0.5)),
                                      g.constant(Tensor<double>::full({T, J, 129}, 0.5)), tgt);
    for (int j = 0; j < J; ++j) {
      CHECK(res.report.onset_terms[j] == doctest::Approx(std::log(2.0)));
      CHECK(res.report.frame_terms[j] == doctest::Approx(std::log(2.0)));
    }
    CHECK(res.report.total == doctest::Approx(2 * J * std::log(2.0)));
  }
  SUBCASE("per-instrument additivity") {
    Graph<double> g;
    Var<double> onset = g.constant(Tensor<double>::full({T, J, 128}, 0.3));
    Var<double> frame = g.constant(Tensor<double>::full({T, J, 129}, 0.6));
    auto res = multitask_loss<double>(onset, frame, tgt);
    double sum = 0;
    for (int j = 0; j < J; ++j) sum += res.report.onset_terms[j] + res.report.frame_terms[j];
    CHECK(res.report.total == doctest::Approx(sum).epsilon(1e-6));
  }
  SUBCASE("masked instruments contribute nothing and receive no gradient") {
    tgt.mask = {true, false, true};
    Graph<double> g;
    nn::Parameter<double> logits("logits", Tensor<double>({T, J, 128}));
    Var<double> onset = nn::sigmoid(g.param(logits));
    Var<double> frame = g.constant(Tensor<double>::full({T, J, 129}, 0.5));
    auto res = multitask_loss<double>(onset, frame, tgt);
    g.backward(res.total);
    CHECK(res.report.onset_terms[1] == 0.0);
    for (int t = 0; t < T; ++t)
      for (int p = 0; p < 128; ++p) CHECK(logits.grad.at(t, 1, p) == 0.0);
    double live = 0;
    for (int t = 0; t < T; ++t)
      for (int p = 0; p < 128; ++p) live += std::abs(logits.grad.at(t, 0, p));
    CHECK(live > 0.0);
  }
  SUBCASE("an all-false mask yields zero loss and zero gradients") {
    tgt.mask = {false, false, false};
    Graph<double> g;
    nn::Parameter<double> logits("logits", Tensor<double>({T, J, 128}));
    Var<double> onset = nn::sigmoid(g.param(logits));
    Var<double> frame = g.constant(Tensor<double>::full({T, J, 129}, 0.5));
    auto res = multitask_loss<double>(onset, frame, tgt);
    CHECK(res.report.total == 0.0);
    g.backward(res.total);
    for (int64_t i = 0; i < logits.grad.size(); ++i) CHECK(logits.grad[i] == 0.0);
  }
  SUBCASE("out-of-range probabilities are rejected") {
    Graph<double> g;
    Tensor<double> bad = Tensor<double>::full({T, J, 128}, 0.5);
    bad[0] = 1.5;
    CHECK_THROWS_AS(multitask_loss<double>(g.constant(bad),
                                           g.constant(Tensor<double>::full({T, J, 129}, 0.5)), tgt),
                    nn::NumericError);
  }
}

TEST_CASE("train_loop basics") {
  const Dataset& ds = tiny_dataset();
  SUBCASE("loss drops on a fixed micro set") {
    model::TranscriptionModel<float> m(tiny_duo_config(), 100);
    TrainConfig tcfg;
    tcfg.steps = 60;
    tcfg.batch_size = 4;
    tcfg.overfit_fixed = true;
    tcfg.seed = 100;
    tcfg.val_every = 0;
    const TrainResult res = train_loop<float>(m, ds, nullptr, tcfg);
    REQUIRE(res.steps_run == 60);
    // smoothed over 5-step windows, monotone after the warmup
    auto smooth = [&](int s) {
      double v = 0;
      for (int i = s; i < s + 5; ++i) v += res.loss_curve[static_cast<size_t>(i)];
      return v / 5;
    };
    for (int s = 10; s + 10 < 60; s += 5) CHECK(smooth(s + 5) < smooth(s) * 1.05);
    CHECK(res.loss_curve.back() < res.loss_curve.front());
  }
  SUBCASE("zero learning rate leaves parameters untouched") {
    model::TranscriptionModel<float> m(tiny_duo_config(), 101);
    const Tensor<float> before = m.params().at("block0.sca.attn.wq").value;
    TrainConfig tcfg;
    tcfg.steps = 3;
    tcfg.batch_size = 2;
    tcfg.lr = 0.0;
    tcfg.weight_decay = 5e-3;
    tcfg.seed = 101;
    tcfg.val_every = 0;
    tcfg.overfit_fixed = true;
    train_loop<float>(m, ds, nullptr, tcfg);
    const Tensor<float>& after = m.params().at("block0.sca.attn.wq").value;
    for (int64_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  }
  SUBCASE("identical seeds give bit-identical loss curves in 64-bit mode") {
    TrainConfig tcfg;
    tcfg.steps = 8;
    tcfg.batch_size = 2;
    tcfg.seed = 321;
    tcfg.val_every = 0;
    model::TranscriptionModel<double> m1(tiny_duo_config(), tcfg.seed);
    model::TranscriptionModel<double> m2(tiny_duo_config(), tcfg.seed);
    const TrainResult r1 = train_loop<double>(m1, ds, nullptr, tcfg);
    const TrainResult r2 = train_loop<double>(m2, ds, nullptr, tcfg);
    REQUIRE(r1.loss_curve.size() == r2.loss_curve.size());
    for (size_t i = 0; i < r1.loss_curve.size(); ++i)
      CHECK(std::memcmp(&r1.loss_curve[i], &r2.loss_curve[i], sizeof(double)) == 0);
  }
  SUBCASE("resume continues the step counter") {
    const std::string out = "/tmp/amt_train_resume";
    std::filesystem::remove_all(out);
    model::TranscriptionModel<float> m(tiny_duo_config(), 102);
    TrainConfig tcfg;
    tcfg.steps = 6;
    tcfg.batch_size = 2;
    tcfg.seed = 102;
    tcfg.val_every = 0;
    train_loop<float>(m, ds, nullptr, tcfg, out);
    model::TranscriptionModel<float> m2(tiny_duo_config(), 999);
    TrainConfig rcfg = tcfg;
    rcfg.steps = 10;
    rcfg.resume_from = out + "/final.ckpt";
    const TrainResult res = train_loop<float>(m2, ds, nullptr, rcfg, out);
    CHECK(res.steps_run == 10);
    CHECK(res.loss_curve.size() == 4);  // only the resumed steps
  }
}
