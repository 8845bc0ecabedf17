// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line;
// run one with --criterion N or everything with no arguments. Work products
// (datasets, checkpoints) live under --workdir and are reused when present,
// so re-runs are cheap; delete the directory for a cold run.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "amt/checkpoint.hpp"
#include "amt/dataset.hpp"
#include "amt/decode.hpp"
#include "amt/gradcheck.hpp"
#include "amt/loss.hpp"
#include "amt/metrics.hpp"
#include "amt/midi.hpp"
#include "amt/model.hpp"
#include "amt/spectrogram.hpp"
#include "amt/threads.hpp"
#include "amt/trainer.hpp"
#include "amt/transcribe.hpp"

using namespace amt;
namespace fs = std::filesystem;

namespace {

std::string g_workdir = "/tmp/amt_acceptance";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void ensure_dataset(const std::string& dir, const data::SynthesisSpec& spec) {
  if (fs::exists(fs::path(dir) / "manifest.json")) return;
  data::Dataset::synthesize(dir, spec, true);
}

template <typename S>
nn::Tensor<S> random_tensor(nn::Shape shape, uint64_t seed, double mean = 0, double stddev = 1) {
  nn::Tensor<S> t(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.normal(mean, stddev));
  return t;
}

// --------------------------------------------------------------------------
// 1. shape contract at the full configuration
// --------------------------------------------------------------------------
Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  model::ModelConfig cfg;  // full: T=300, bins 1024 -> F=128, J=13, K=26, D=128
  cfg.validate();
  model::TranscriptionModel<float> m(cfg, 1);

  const data::InstrumentBank bank = data::InstrumentBank::by_name("full");
  const data::TrainingSample song =
      data::generate_song(bank, data::SourceKind::multi_track, 0, 11, 6.0);
  const nn::Tensor<float> spec = dsp::stft_logmag<float>(song.mixture, cfg.stft());
  if (spec.shape() != nn::Shape{300, 1024})
    return {false, "spectrogram shape " + nn::shape_str(spec.shape())};

  nn::Graph<float> g;
  g.set_grad_enabled(false);
  model::ForwardCtx<float> ctx;
  ctx.graph = &g;
  const auto out = m.forward(ctx, spec);
  const double wall = seconds_since(t0);

  const bool shapes_ok = out.features.shape() == nn::Shape{300, 128, 128} &&
                         out.latents.shape() == nn::Shape{300, 26, 128} &&
                         out.onset.shape() == nn::Shape{300, 13, 128} &&
                         out.frame.shape() == nn::Shape{300, 13, 129};
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "features %s, latents %s, onset %s, frame %s, %.1fs (limit 60s)",
                nn::shape_str(out.features.shape()).c_str(),
                nn::shape_str(out.latents.shape()).c_str(),
                nn::shape_str(out.onset.shape()).c_str(),
                nn::shape_str(out.frame.shape()).c_str(), wall);
  return {shapes_ok && wall < 60.0, buf};
}

// --------------------------------------------------------------------------
// 2. gradient fidelity of the full micro model against central differences
// --------------------------------------------------------------------------
Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  model::ModelConfig cfg = model::ModelConfig::preset("gradcheck");  // T=8, F=16, J=2, D=16
  cfg.validate();
  model::TranscriptionModel<double> m(cfg, 2);

  const nn::Tensor<double> spec =
      random_tensor<double>({cfg.frames(), cfg.spec_bins}, 21, -6.0, 2.0);
  train::TargetRoll<double> tgt;
  tgt.onset = nn::Tensor<double>({cfg.frames(), cfg.instruments, 128});
  tgt.frame = nn::Tensor<double>({cfg.frames(), cfg.instruments, 129});
  tgt.mask.assign(static_cast<size_t>(cfg.instruments), true);
  Rng rng(22);
  for (int64_t i = 0; i < tgt.onset.size(); ++i) tgt.onset[i] = rng.bernoulli(0.01) ? 1.0 : 0.0;
  for (int64_t i = 0; i < tgt.frame.size(); ++i) tgt.frame[i] = rng.bernoulli(0.1) ? 1.0 : 0.0;

  auto eval = [&](bool with_grad) {
    nn::Graph<double> g;
    model::ForwardCtx<double> ctx;
    ctx.graph = &g;
    const auto out = m.forward(ctx, spec);
    auto loss = train::multitask_loss(out.onset, out.frame, tgt);
    if (with_grad) {
      m.params().zero_grads();
      g.backward(loss.total);
    }
    return loss.total.value()[0];
  };
  std::vector<nn::Parameter<double>*> params;
  for (const auto& p : m.params().all()) params.push_back(p.get());
  const auto rep = nn::gradcheck<double>(eval, params, 1e-6, 1e-3, 4);
  const double wall = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "max rel err %.3g (tol 1e-3) over %lld coords of %zu tensors, worst %s, "
                "%.1fs (limit 300s)",
                rep.max_rel_err, static_cast<long long>(rep.coords_checked), params.size(),
                rep.worst_param.c_str(), wall);
  return {rep.pass && wall < 300.0, buf};
}

// --------------------------------------------------------------------------
// 3. complexity structure: counters equal closed form across an F sweep
// --------------------------------------------------------------------------
Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  const int frames = 300;
  const std::vector<int> sweep = {32, 64, 128, 256};
  std::vector<model::AttentionCost> costs;
  for (int bins : sweep) {
    model::ModelConfig cfg;
    cfg.bank = "full";
    int blocks = 1;
    while (blocks < 3 && (bins << (blocks + 1)) <= 1024) ++blocks;
    cfg.conv_channels.assign(static_cast<size_t>(blocks), 128);
    cfg.spec_bins = bins << blocks;
    cfg.window_seconds = frames * 0.020;
    cfg.validate();
    model::TranscriptionModel<float> m(cfg, 3);
    const nn::Tensor<float> features =
        random_tensor<float>({frames, bins, cfg.feature_channels()}, 30 + bins);
    model::attention_counters().reset();
    nn::Graph<float> g;
    g.set_grad_enabled(false);
    model::ForwardCtx<float> ctx;
    ctx.graph = &g;
    m.forward_features(ctx, g.constant(features));
    const auto cost = model::attention_cost(cfg, frames, bins);
    costs.push_back(cost);
    const auto& c = model::attention_counters();
    if (c.sca != static_cast<uint64_t>(cost.sca_pairs) ||
        c.latent != static_cast<uint64_t>(cost.latent_pairs) ||
        c.temporal != static_cast<uint64_t>(cost.temporal_pairs)) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "counter mismatch at F=%d: got %llu/%llu/%llu", bins,
                    static_cast<unsigned long long>(c.sca.load()),
                    static_cast<unsigned long long>(c.latent.load()),
                    static_cast<unsigned long long>(c.temporal.load()));
      return {false, buf};
    }
  }
  bool linear = true;
  for (size_t i = 1; i < costs.size(); ++i) {
    linear &= (costs[i].sca_pairs == 2 * costs[i - 1].sca_pairs);
    linear &= (costs[i].temporal_pairs == costs[i - 1].temporal_pairs);
  }
  const double ratio = static_cast<double>(costs[2].spectnt_spectral_pairs) / costs[2].sca_pairs;
  const double want_ratio = 2.0 * 128.0 / 26.0;  // N*F/K
  const bool ratio_ok = std::abs(ratio - want_ratio) < 0.01;
  const double wall = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "counters exact over F in {32,64,128,256}; sca doubles per step: %s; "
                "frame-level-baseline/sca at F=128 = %.2f (want %.2f), %.1fs (limit 300s)",
                linear ? "yes" : "no", ratio, want_ratio, wall);
  return {linear && ratio_ok && wall < 300.0, buf};
}

// --------------------------------------------------------------------------
// 4. loss masking: unlabeled-accompaniment samples train the vocal task only
// --------------------------------------------------------------------------
Outcome criterion4() {
  const std::string dir = g_workdir + "/vocal_pool";
  data::SynthesisSpec spec;
  spec.bank = "small_vocal";
  spec.kind = "mixed";
  spec.songs = 12;
  spec.song_seconds = 4.0;
  spec.seed = 404;
  ensure_dataset(dir, spec);
  const data::Dataset pool = data::Dataset::open(dir);
  const data::InstrumentBank& bank = pool.bank();
  const int vocal = bank.vocal_id();

  model::ModelConfig cfg = model::ModelConfig::preset("gradcheck");
  cfg.bank = "small_vocal";
  cfg.instruments = 4;
  cfg.window_seconds = 0.64;  // 32 frames
  cfg.validate();
  model::TranscriptionModel<double> m(cfg, 4);

  // draw a vocal-mixture sample through mixing branch (ii)
  data::AugmentConfig aug;
  aug.vocal_background_prob = 1.0;
  data::TrainingSample mixed;
  bool found = false;
  for (size_t i = 0; i < pool.size() && !found; ++i) {
    if (pool.info(i).kind != data::SourceKind::vocal_mixture) continue;
    for (uint64_t seed = 0; seed < 64 && !found; ++seed) {
      data::MixStats st;
      const auto excerpt = data::sample_excerpt(pool.load_song(i), cfg.window_seconds, seed);
      const auto candidate =
          data::random_mix(excerpt, pool, bank, aug, cfg.window_seconds, seed, &st);
      if (st.vocal_branch == 2) {
        mixed = candidate;
        found = true;
      }
    }
  }
  if (!found) return {false, "no branch-(ii) sample found in the pool"};

  const auto tgt = train::build_targets<double>(mixed, bank, cfg.frames());
  for (int j = 0; j < bank.size(); ++j)
    if (tgt.mask[static_cast<size_t>(j)] != (j == vocal)) return {false, "mask is not vocal-only"};

  const nn::Tensor<double> spec_in = dsp::stft_logmag<double>(mixed.mixture, cfg.stft());
  nn::Graph<double> g;
  model::ForwardCtx<double> ctx;
  ctx.graph = &g;
  const auto out = m.forward(ctx, spec_in);
  auto loss = train::multitask_loss(out.onset, out.frame, tgt);

  double vocal_terms = loss.report.onset_terms[static_cast<size_t>(vocal)] +
                       loss.report.frame_terms[static_cast<size_t>(vocal)];
  double nonvocal_terms = 0;
  for (int j = 0; j < bank.size(); ++j)
    if (j != vocal)
      nonvocal_terms += loss.report.onset_terms[static_cast<size_t>(j)] +
                        loss.report.frame_terms[static_cast<size_t>(j)];
  if (std::abs(loss.report.total - vocal_terms) > 1e-6 || nonvocal_terms != 0.0)
    return {false, "loss total is not the vocal terms alone"};

  m.params().zero_grads();
  g.backward(loss.total);

  // the two heads are shared across instruments, so the per-instrument
  // surfaces are the prediction slices and the per-instrument latent rows;
  // every non-vocal entry must hold an exactly zero gradient
  auto split_grads = [&](nn::Var<double> v, int rows_per_instrument) {
    const nn::Tensor<double>& gr = g.grad(v.id);
    double nonvocal_max = 0, vocal_max = 0;
    for (int64_t t = 0; t < gr.dim(0); ++t)
      for (int64_t j = 0; j < gr.dim(1); ++j)
        for (int64_t p = 0; p < gr.dim(2); ++p) {
          const int inst = static_cast<int>(j) / rows_per_instrument;
          double& slot = inst == vocal ? vocal_max : nonvocal_max;
          slot = std::max(slot, std::abs(gr.at(t, j, p)));
        }
    return std::make_pair(nonvocal_max, vocal_max);
  };
  const auto [onset_nv, onset_v] = split_grads(out.onset, 1);
  const auto [frame_nv, frame_v] = split_grads(out.frame, 1);
  const auto [lat_nv, lat_v] = split_grads(out.latents, 2);
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "total==vocal terms (diff %.1e); non-vocal grads: onset %.1e frame %.1e "
                "latent rows %.1e (all must be 0); vocal paths live: %s",
                std::abs(loss.report.total - vocal_terms), onset_nv, frame_nv, lat_nv,
                (onset_v > 0 && frame_v > 0 && lat_v > 0) ? "yes" : "no");
  const bool pass = onset_nv == 0.0 && frame_nv == 0.0 && lat_nv == 0.0 && onset_v > 0 &&
                    frame_v > 0 && lat_v > 0;
  return {pass, buf};
}

// --------------------------------------------------------------------------
// 5. symmetry suite in 64-bit
// --------------------------------------------------------------------------
Outcome criterion5() {
  model::ModelConfig cfg = model::ModelConfig::preset("gradcheck");
  cfg.freq_pos_emb = false;
  cfg.temporal_pos_emb = false;
  cfg.validate();
  nn::ParamStore<double> store;
  model::PerceiverTF<double> ptf(cfg, store, 5);
  const int T = cfg.frames(), F = cfg.feature_bins(), C = cfg.feature_channels();
  const int64_t kd = static_cast<int64_t>(cfg.num_latents()) * cfg.latent_dim;
  const nn::Tensor<double> feats = random_tensor<double>({T, F, C}, 50);
  auto run = [&](const nn::Tensor<double>& f) {
    nn::Graph<double> g;
    model::ForwardCtx<double> ctx;
    ctx.graph = &g;
    return ptf.forward(g.constant(f), ctx).value();
  };

  // (a) frequency permutation invariance
  nn::Tensor<double> fperm({T, F, C});
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      for (int c = 0; c < C; ++c) fperm.at(t, f, c) = feats.at(t, (f * 5 + 3) % F, c);
  double da = 0;
  {
    const auto a = run(feats), b = run(fperm);
    for (int64_t i = 0; i < a.size(); ++i) da = std::max(da, std::abs(a[i] - b[i]));
  }

  // (b) temporal permutation equivariance
  std::vector<int> perm(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) perm[static_cast<size_t>(i)] = (i * 3 + 1) % T;
  nn::Tensor<double> tperm({T, F, C});
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      for (int c = 0; c < C; ++c) tperm.at(t, f, c) = feats.at(perm[static_cast<size_t>(t)], f, c);
  double db = 0;
  {
    const auto base = run(feats), moved = run(tperm);
    for (int t = 0; t < T; ++t)
      for (int64_t i = 0; i < kd; ++i)
        db = std::max(db,
                      std::abs(moved[t * kd + i] - base[perm[static_cast<size_t>(t)] * kd + i]));
  }

  // (c) identical frames, zero positional tables -> constant time slices
  nn::Tensor<double> constant_frames({T, F, C});
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f)
      for (int c = 0; c < C; ++c) constant_frames.at(t, f, c) = feats.at(0, f, c);
  double dc = 0;
  {
    const auto out = run(constant_frames);
    for (int t = 1; t < T; ++t)
      for (int64_t i = 0; i < kd; ++i) dc = std::max(dc, std::abs(out[t * kd + i] - out[i]));
  }

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "freq-permutation %.2e, time-equivariance %.2e, time-constancy %.2e (all < 1e-5)",
                da, db, dc);
  return {da < 1e-5 && db < 1e-5 && dc < 1e-5, buf};
}

// --------------------------------------------------------------------------
// 6. overfit substitute: 8 fixed samples to onset F1 >= 0.95, one core
// --------------------------------------------------------------------------
Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  set_num_threads(1);
  const std::string dir = g_workdir + "/overfit8";
  data::SynthesisSpec spec;
  spec.bank = "small";
  spec.kind = "multi_track";
  spec.songs = 8;
  spec.song_seconds = 6.0;
  spec.seed = 606;
  ensure_dataset(dir, spec);
  const data::Dataset ds = data::Dataset::open(dir);

  model::ModelConfig cfg = model::ModelConfig::preset("desk");  // T=100, F=32, D=32, J=3
  cfg.dropout = 0.0;
  cfg.validate();
  model::TranscriptionModel<float> m(cfg, 6);

  train::TrainConfig tcfg;
  tcfg.steps = 2000;
  tcfg.batch_size = 8;
  tcfg.lr = 2e-3;
  tcfg.constant_frac = 1.0;
  tcfg.seed = 6;
  tcfg.overfit_fixed = true;
  tcfg.val_every = 25;
  tcfg.early_stop_f1 = 0.95;
  const auto res = train::train_loop<float>(m, ds, nullptr, tcfg, g_workdir + "/overfit8_run");
  const double wall = seconds_since(t0);
  set_num_threads(0);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "train onset F1 %.3f at step %d of %d (want >= 0.95 within 2000), "
                "%.0fs on one core (limit 1800s)",
                res.best_f1, res.best_f1_step, res.steps_run, wall);
  return {res.best_f1 >= 0.95 && res.best_f1_step <= 2000 && wall < 1800.0, buf};
}

// --------------------------------------------------------------------------
// 7. generalization + random-mixing ablation
// --------------------------------------------------------------------------
using EvalSet = std::vector<std::pair<std::vector<NoteEvent>, nn::Tensor<float>>>;

double pooled_f1(model::TranscriptionModel<float>& m, const data::InstrumentBank& bank,
                 const EvalSet& set) {
  int64_t tp = 0, n_est = 0, n_ref = 0;
  for (const auto& [ref, spec] : set) {
    const auto rolls = m.infer(spec);
    const auto est = decode::decode(rolls.onset, rolls.frame, bank, 0.25);
    const auto rep = metrics::multi_instrument_onset_f1(ref, est);
    tp += rep.pooled.matches;
    n_est += rep.pooled.n_est;
    n_ref += rep.pooled.n_ref;
  }
  return metrics::prf_from_counts(tp, n_est, n_ref).f1;
}

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string train_dir = g_workdir + "/desk_train";
  const std::string held_dir = g_workdir + "/desk_held";
  {
    data::SynthesisSpec spec;
    spec.bank = "small";
    spec.kind = "multi_track";
    spec.song_seconds = 12.0;
    spec.songs = 500;
    spec.seed = 700;
    ensure_dataset(train_dir, spec);
    spec.songs = 50;
    spec.seed = 1700;
    ensure_dataset(held_dir, spec);
  }
  const data::Dataset train_data = data::Dataset::open(train_dir);
  const data::Dataset held = data::Dataset::open(held_dir);
  model::ModelConfig cfg = model::ModelConfig::preset("desk");
  cfg.validate();

  auto train_one = [&](bool random_mix, const std::string& tag) {
    auto m = std::make_unique<model::TranscriptionModel<float>>(cfg, 7);
    const std::string ckpt = g_workdir + "/" + tag + "/best.ckpt";
    if (fs::exists(ckpt)) {
      nn::load_checkpoint<float>(ckpt, m->params());
      return m;
    }
    train::TrainConfig tcfg;
    tcfg.steps = 3500;
    tcfg.batch_size = 8;
    tcfg.seed = 7;
    tcfg.random_mix = random_mix;
    tcfg.pitch_shift = true;
    tcfg.val_every = 250;
    const auto res = train::train_loop<float>(
        *m, train_data, &held, tcfg, g_workdir + "/" + tag, [&](const train::ValPoint& vp) {
          std::printf("  [%s] step %d loss %.5f f1 %.3f (%.0fs)\n", tag.c_str(), vp.step, vp.loss,
                      vp.f1, seconds_since(t0));
          std::fflush(stdout);
        });
    nn::load_checkpoint<float>(res.best_checkpoint, m->params());
    return m;
  };

  auto rm_model = train_one(true, "desk_rm");
  auto norm_model = train_one(false, "desk_norm");

  // natural held-out excerpts, plus the same excerpts with every stem
  // force-swapped across songs
  EvalSet natural, swapped;
  {
    data::AugmentConfig force_swap;
    force_swap.stem_replace_prob = 1.0;
    for (size_t i = 0; i < held.size(); ++i) {
      const auto nat =
          data::sample_excerpt(held.load_song(i), cfg.window_seconds, derive_seed(700, {i}));
      natural.emplace_back(train::labeled_notes(nat),
                           dsp::stft_logmag<float>(nat.mixture, cfg.stft()));
      const auto swp = data::random_mix(nat, held, held.bank(), force_swap, cfg.window_seconds,
                                        derive_seed(701, {i}));
      swapped.emplace_back(train::labeled_notes(swp),
                           dsp::stft_logmag<float>(swp.mixture, cfg.stft()));
    }
  }
  const double f1_rm_nat = pooled_f1(*rm_model, held.bank(), natural);
  const double f1_rm_swp = pooled_f1(*rm_model, held.bank(), swapped);
  const double f1_norm_swp = pooled_f1(*norm_model, held.bank(), swapped);
  const double margin = f1_rm_swp - f1_norm_swp;

  // end-to-end surface check: windowed transcription of one held-out song,
  // both output formats written and readable
  {
    const auto song = held.load_song(0);
    const auto notes = transcribe_clip(*rm_model, song.mixture, held.bank(), 0.25);
    decode::write_midi(g_workdir + "/transcribe_e2e.mid", notes, held.bank());
    write_notes_jsonl(g_workdir + "/transcribe_e2e.jsonl", notes);
    if (decode::read_midi(g_workdir + "/transcribe_e2e.mid", held.bank()).size() != notes.size())
      return {false, "windowed transcription did not round-trip through the MIDI writer"};
  }

  const double wall = seconds_since(t0);
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "held-out F1 %.3f (want >= 0.85); stem-swapped: with mixing %.3f vs without "
                "%.3f, margin %.3f (want >= 0.02); %.0fs",
                f1_rm_nat, f1_rm_swp, f1_norm_swp, margin, wall);
  return {f1_rm_nat >= 0.85 && margin >= 0.02, buf};
}

// --------------------------------------------------------------------------
// 8. decode/metric round trip and matcher optimality
// --------------------------------------------------------------------------
int64_t optimal_match_count(const std::vector<NoteEvent>& ref, const std::vector<NoteEvent>& est,
                            double tol) {
  std::vector<std::vector<int>> candidates(est.size());
  for (size_t e = 0; e < est.size(); ++e)
    for (size_t r = 0; r < ref.size(); ++r)
      if (ref[r].pitch == est[e].pitch && std::abs(ref[r].onset - est[e].onset) <= tol)
        candidates[e].push_back(static_cast<int>(r));
  int64_t best = 0;
  std::vector<bool> used(ref.size(), false);
  std::function<void(size_t, int64_t)> go = [&](size_t e, int64_t acc) {
    if (e == est.size()) {
      best = std::max(best, acc);
      return;
    }
    go(e + 1, acc);
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

Outcome criterion8() {
  const data::InstrumentBank bank = data::InstrumentBank::by_name("small");
  Rng rng(808);
  // (a) 100 clean note sets survive target building + decoding exactly
  for (int set = 0; set < 100; ++set) {
    data::TrainingSample s;
    s.seconds = 2.0;
    std::map<std::pair<int, int>, double> last_end;
    for (int j = 0; j < bank.size(); ++j) {
      data::Stem stem;
      stem.instrument = j;
      stem.audio.samples.assign(32000, 0.0f);
      const int n = 3 + static_cast<int>(rng.uniform_int(6));
      for (int i = 0; i < n; ++i) {
        const int pitch = bank.at(j).percussive ? 36 + 2 * static_cast<int>(rng.uniform_int(4))
                                                : 40 + static_cast<int>(rng.uniform_int(48));
        const int on = static_cast<int>(rng.uniform_int(92));
        const int len = 1 + static_cast<int>(rng.uniform_int(6));
        const auto key = std::make_pair(j, pitch);
        if (last_end.count(key) && on * 0.020 < last_end[key] + 0.040) continue;
        last_end[key] = (on + len) * 0.020;
        stem.notes.push_back({j, pitch, on * 0.020, (on + len) * 0.020});
      }
      s.stems.push_back(std::move(stem));
    }
    s.remix();
    const auto tgt = train::build_targets<float>(s, bank, 100);
    const auto decoded = decode::decode(tgt.onset, tgt.frame, bank, 0.25);
    const auto rep = metrics::multi_instrument_onset_f1(train::labeled_notes(s), decoded);
    if (rep.pooled.f1 != 1.0) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "set %d: round-trip F1 %.4f != 1.0", set, rep.pooled.f1);
      return {false, buf};
    }
  }
  // (b) greedy matcher equals the exhaustive optimum on 1000 small instances
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&](int max_n) {
      std::vector<NoteEvent> notes;
      const int n = static_cast<int>(rng.uniform_int(max_n + 1));
      for (int i = 0; i < n; ++i) {
        const double t = rng.uniform(0.0, 0.9);
        notes.push_back({0, 60 + static_cast<int>(rng.uniform_int(3)), t, t + 0.1});
      }
      return notes;
    };
    const auto ref = draw(6), est = draw(6);
    if (metrics::match_count(ref, est, 0.05) != optimal_match_count(ref, est, 0.05))
      return {false, "greedy matcher mismatched the exhaustive optimum"};
  }
  return {true,
          "100/100 target->decode round trips at F1 == 1.0; greedy == optimal on 1000 instances"};
}

// --------------------------------------------------------------------------
// 9. determinism end to end
// --------------------------------------------------------------------------
Outcome criterion9() {
  // (a) dataset synthesis is byte-identical per seed
  const std::string d1 = g_workdir + "/det_a", d2 = g_workdir + "/det_b";
  data::SynthesisSpec spec;
  spec.bank = "small";
  spec.kind = "multi_track";
  spec.songs = 6;
  spec.song_seconds = 4.0;
  spec.seed = 909;
  data::Dataset::synthesize(d1, spec, true);
  data::Dataset::synthesize(d2, spec, true);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  for (const auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), d1);
    if (slurp(e.path()) != slurp(fs::path(d2) / rel))
      return {false, "dataset files differ: " + rel.string()};
  }
  // (b) 64-bit training curves are bit-identical per seed
  const data::Dataset ds = data::Dataset::open(d1);
  model::ModelConfig cfg = model::ModelConfig::preset("desk");
  cfg.window_seconds = 1.0;
  cfg.validate();
  train::TrainConfig tcfg;
  tcfg.steps = 12;
  tcfg.batch_size = 4;
  tcfg.seed = 99;
  tcfg.val_every = 0;
  model::TranscriptionModel<double> m1(cfg, tcfg.seed), m2(cfg, tcfg.seed);
  const auto r1 = train::train_loop<double>(m1, ds, nullptr, tcfg);
  const auto r2 = train::train_loop<double>(m2, ds, nullptr, tcfg);
  if (r1.loss_curve.size() != r2.loss_curve.size()) return {false, "curve lengths differ"};
  for (size_t i = 0; i < r1.loss_curve.size(); ++i)
    if (std::memcmp(&r1.loss_curve[i], &r2.loss_curve[i], sizeof(double)) != 0)
      return {false, "loss curves diverge at step " + std::to_string(i)};
  return {true, "datasets byte-identical; 12-step 64-bit loss curves bit-identical"};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "shape contract at the full configuration", criterion1},
    {2, "gradient fidelity vs central differences (64-bit)", criterion2},
    {3, "attention cost: counters equal closed form, linear in F", criterion3},
    {4, "loss masking trains only the vocal task on unlabeled backgrounds", criterion4},
    {5, "symmetry suite (64-bit, 1e-5)", criterion5},
    {6, "overfit: 8 fixed samples to onset F1 >= 0.95 on one core", criterion6},
    {7, "generalization >= 0.85 and the random-mixing ablation margin", criterion7},
    {8, "decode/metric round trip; greedy matcher optimality", criterion8},
    {9, "seeded determinism of datasets and 64-bit training", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--workdir") == 0 && i + 1 < argc) g_workdir = argv[++i];
  }
  fs::create_directories(g_workdir);
  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d: %s — %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.title,
                outcome.detail.c_str());
    std::fflush(stdout);
    all_pass &= outcome.pass;
  }
  return all_pass ? 0 : 1;
}
