#pragma once

#include <functional>
#include <string>

#include "amt/adamw.hpp"
#include "amt/dataset.hpp"
#include "amt/model.hpp"

namespace amt::train {

struct TrainConfig {
  int steps = 2000;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 5e-3;
  double lr_final_scale = 0.1;  // cosine tail target, relative to lr
  double constant_frac = 0.5;   // fraction of steps at constant lr before the decay
  uint64_t seed = 0;
  bool random_mix = true;
  bool pitch_shift = true;
  data::AugmentConfig augment;
  double threshold = 0.25;
  int val_every = 100;
  int checkpoint_every = 0;   // 0 = only final/best
  int max_val_songs = 24;
  double early_stop_f1 = -1.0;
  /// Train on a fixed set of the first batch_size songs, no augmentation,
  /// and validate on exactly that set.
  bool overfit_fixed = false;
  std::string resume_from;
};

struct ValPoint {
  int step = 0;
  double loss = 0.0;
  double f1 = 0.0;
};

struct TrainResult {
  int steps_run = 0;
  double final_loss = 0.0;
  double best_f1 = 0.0;
  int best_f1_step = -1;
  std::string final_checkpoint;
  std::string best_checkpoint;
  std::vector<double> loss_curve;  // one entry per step
  std::vector<ValPoint> validations;
};

/// One training step: draw a batch, excerpt + pitch-shift + random-mix each
/// member, forward, Eq-style multi-task loss, backward, AdamW. Batch members
/// run in parallel; their gradients flush in member order so runs are
/// reproducible. Periodic validation scores decoded notes against ground
/// truth and tracks the best checkpoint. Aborts on a non-finite loss naming
/// the offending sample.
template <typename S>
TrainResult train_loop(model::TranscriptionModel<S>& m, const data::Dataset& train_data,
                       const data::Dataset* val_data, const TrainConfig& tcfg,
                       const std::string& out_dir = "",
                       const std::function<void(const ValPoint&)>& on_validate = {});

}  // namespace amt::train
