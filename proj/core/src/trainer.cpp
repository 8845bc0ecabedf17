#include "amt/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "amt/checkpoint.hpp"
#include "amt/decode.hpp"
#include "amt/loss.hpp"
#include "amt/metrics.hpp"
#include "amt/spectrogram.hpp"
#include "amt/threads.hpp"

namespace amt::train {

namespace {

namespace fs = std::filesystem;

template <typename S>
struct PreparedSample {
  nn::Tensor<S> spec;
  TargetRoll<S> roll;
  std::vector<NoteEvent> notes;
  uint64_t song_id = 0;
};

template <typename S>
PreparedSample<S> prepare(const data::Dataset& ds, size_t song_index,
                          const model::ModelConfig& cfg, const TrainConfig& tcfg,
                          uint64_t excerpt_seed, uint64_t augment_seed, bool augment) {
  const data::InstrumentBank& bank = ds.bank();
  data::TrainingSample sample =
      data::sample_excerpt(ds.load_song(song_index), cfg.window_seconds, excerpt_seed);
  if (augment && tcfg.pitch_shift) {
    Rng rng(derive_seed(augment_seed, {kStreamPitchShift}));
    if (rng.uniform() < tcfg.augment.pitch_shift_prob) {
      const int shift = data::pick_pitch_shift(sample, bank, tcfg.augment.pitch_shift_max, rng);
      sample = data::pitch_shift(sample, bank, shift);
    }
  }
  if (augment && tcfg.random_mix)
    sample = data::random_mix(sample, ds, bank, tcfg.augment, cfg.window_seconds,
                              derive_seed(augment_seed, {kStreamRandomMix}));
  PreparedSample<S> prep;
  prep.spec = dsp::stft_logmag<S>(sample.mixture, cfg.stft());
  prep.roll = build_targets<S>(sample, bank, cfg.frames(), cfg.stft().hop_seconds());
  prep.notes = labeled_notes(sample);
  prep.song_id = sample.song_id;
  return prep;
}

template <typename S>
double validation_f1(model::TranscriptionModel<S>& m, const std::vector<PreparedSample<S>>& vals,
                     const data::InstrumentBank& bank, double threshold,
                     metrics::ScoreReport* out_report = nullptr) {
  // pool matches across pieces (micro average)
  int64_t tp = 0, n_est = 0, n_ref = 0;
  for (const PreparedSample<S>& v : vals) {
    const auto rolls = m.infer(v.spec);
    const std::vector<NoteEvent> est = decode::decode(rolls.onset, rolls.frame, bank, threshold);
    const metrics::ScoreReport r = metrics::multi_instrument_onset_f1(v.notes, est);
    tp += r.pooled.matches;
    n_est += r.pooled.n_est;
    n_ref += r.pooled.n_ref;
  }
  const metrics::Prf pooled = metrics::prf_from_counts(tp, n_est, n_ref);
  if (out_report) out_report->pooled = pooled;
  return pooled.f1;
}

}  // namespace

template <typename S>
TrainResult train_loop(model::TranscriptionModel<S>& m, const data::Dataset& train_data,
                       const data::Dataset* val_data, const TrainConfig& tcfg,
                       const std::string& out_dir,
                       const std::function<void(const ValPoint&)>& on_validate) {
  if (train_data.size() == 0) throw std::invalid_argument("train: empty dataset");
  const model::ModelConfig& cfg = m.config();
  const data::InstrumentBank& bank = train_data.bank();
  const int B = tcfg.batch_size;

  nn::AdamW<S> opt;
  opt.config().lr = tcfg.lr;
  opt.config().weight_decay = tcfg.weight_decay;
  int start_step = 0;
  if (!tcfg.resume_from.empty()) {
    nn::load_checkpoint<S>(tcfg.resume_from, m.params(), &opt);
    start_step = static_cast<int>(opt.step_count());
  }

  std::ofstream metrics_log;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    metrics_log.open(fs::path(out_dir) / "metrics.jsonl",
                     start_step > 0 ? std::ios::app : std::ios::trunc);
  }

  // fixed-set mode reuses the same prepared members every step
  std::vector<PreparedSample<S>> fixed;
  if (tcfg.overfit_fixed) {
    for (int b = 0; b < B; ++b) {
      const size_t idx = static_cast<size_t>(b) % train_data.size();
      fixed.push_back(prepare<S>(train_data, idx, cfg, tcfg,
                                 derive_seed(tcfg.seed, {kStreamExcerpt, static_cast<uint64_t>(b)}),
                                 0, false));
    }
  }
  std::vector<PreparedSample<S>> val_set;
  if (tcfg.overfit_fixed) {
    val_set = fixed;
  } else if (val_data) {
    const size_t n = std::min<size_t>(val_data->size(), static_cast<size_t>(tcfg.max_val_songs));
    for (size_t i = 0; i < n; ++i)
      val_set.push_back(prepare<S>(*val_data, i, cfg, tcfg,
                                   derive_seed(tcfg.seed, {kStreamExcerpt, 0xA11u, i}), 0, false));
  }

  TrainResult result;
  const std::string ckpt_final = out_dir.empty() ? "" : (fs::path(out_dir) / "final.ckpt").string();
  const std::string ckpt_best = out_dir.empty() ? "" : (fs::path(out_dir) / "best.ckpt").string();

  auto save = [&](const std::string& path) {
    if (path.empty()) return;
    nn::save_checkpoint<S>(path, m.params(), &opt, cfg.to_kv());
  };

  std::vector<double> member_loss(static_cast<size_t>(B));
  std::vector<uint64_t> member_song(static_cast<size_t>(B));
  for (int step = start_step; step < tcfg.steps; ++step) {
    // constant lr, then cosine decay to lr * lr_final_scale
    const double frac = tcfg.steps > 1 ? static_cast<double>(step) / (tcfg.steps - 1) : 0.0;
    if (frac <= tcfg.constant_frac || tcfg.steps <= 1) {
      opt.config().lr = tcfg.lr;
    } else {
      const double u = (frac - tcfg.constant_frac) / std::max(1e-9, 1.0 - tcfg.constant_frac);
      const double lo = tcfg.lr * tcfg.lr_final_scale;
      opt.config().lr = lo + (tcfg.lr - lo) * 0.5 * (1.0 + std::cos(M_PI * u));
    }

    std::vector<std::unique_ptr<nn::Graph<S>>> graphs(static_cast<size_t>(B));
    parallel_for(B, [&](int64_t lo, int64_t hi) {
      for (int64_t b = lo; b < hi; ++b) {
        const uint64_t ustep = static_cast<uint64_t>(step), ub = static_cast<uint64_t>(b);
        PreparedSample<S> prep;
        if (tcfg.overfit_fixed) {
          prep = fixed[static_cast<size_t>(b)];
        } else {
          Rng draw(derive_seed(tcfg.seed, {kStreamBatchDraw, ustep, ub}));
          const size_t idx =
              static_cast<size_t>(draw.uniform_int(static_cast<int64_t>(train_data.size())));
          prep = prepare<S>(train_data, idx, cfg, tcfg,
                            derive_seed(tcfg.seed, {kStreamExcerpt, ustep, ub}),
                            derive_seed(tcfg.seed, {kStreamRandomMix, ustep, ub}), true);
        }
        member_song[static_cast<size_t>(b)] = prep.song_id;

        auto g = std::make_unique<nn::Graph<S>>();
        model::ForwardCtx<S> ctx;
        ctx.graph = g.get();
        ctx.training = true;
        ctx.dropout = cfg.dropout;
        ctx.dropout_rng = Rng(derive_seed(tcfg.seed, {kStreamDropout, ustep, ub}));
        const auto out = m.forward(ctx, prep.spec);
        LossResult<S> loss = multitask_loss(out.onset, out.frame, prep.roll);
        member_loss[static_cast<size_t>(b)] = loss.report.total;
        nn::Var<S> scaled = nn::scale(loss.total, 1.0 / B);
        g->backward_collect(scaled);
        graphs[static_cast<size_t>(b)] = std::move(g);
      }
    });

    double step_loss = 0.0;
    for (int b = 0; b < B; ++b) {
      if (!std::isfinite(member_loss[static_cast<size_t>(b)]))
        throw nn::NumericError("train: non-finite loss at step " + std::to_string(step) +
                               ", batch member " + std::to_string(b) + ", song " +
                               std::to_string(member_song[static_cast<size_t>(b)]));
      step_loss += member_loss[static_cast<size_t>(b)] / B;
      graphs[static_cast<size_t>(b)]->flush_param_grads();
    }
    opt.step(m.params());
    m.params().zero_grads();
    result.loss_curve.push_back(step_loss);
    result.final_loss = step_loss;
    result.steps_run = step + 1;

    const bool last = step + 1 == tcfg.steps;
    if ((tcfg.val_every > 0 && (step + 1) % tcfg.val_every == 0) || last) {
      ValPoint vp;
      vp.step = step + 1;
      vp.loss = step_loss;
      if (!val_set.empty()) vp.f1 = validation_f1(m, val_set, bank, tcfg.threshold);
      result.validations.push_back(vp);
      if (metrics_log.is_open()) {
        nlohmann::json j{{"step", vp.step}, {"loss", vp.loss}, {"f1", vp.f1},
                         {"lr", opt.config().lr}};
        metrics_log << j.dump() << "\n";
        metrics_log.flush();
      }
      if (on_validate) on_validate(vp);
      if (vp.f1 > result.best_f1) {
        result.best_f1 = vp.f1;
        result.best_f1_step = vp.step;
        save(ckpt_best);
      }
      if (tcfg.early_stop_f1 > 0 && vp.f1 >= tcfg.early_stop_f1) break;
    }
    if (tcfg.checkpoint_every > 0 && (step + 1) % tcfg.checkpoint_every == 0) save(ckpt_final);
  }

  save(ckpt_final);
  result.final_checkpoint = ckpt_final;
  result.best_checkpoint = result.best_f1_step > 0 ? ckpt_best : ckpt_final;
  return result;
}

template TrainResult train_loop<float>(model::TranscriptionModel<float>&, const data::Dataset&,
                                       const data::Dataset*, const TrainConfig&,
                                       const std::string&,
                                       const std::function<void(const ValPoint&)>&);
template TrainResult train_loop<double>(model::TranscriptionModel<double>&, const data::Dataset&,
                                        const data::Dataset*, const TrainConfig&,
                                        const std::string&,
                                        const std::function<void(const ValPoint&)>&);

}  // namespace amt::train
