#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lttd/model.hpp"

namespace lttd {

struct TrainConfig {
  double lr = 1e-4;
  int64_t batch_size = 8;
  int64_t max_steps = 5000;
  int64_t plateau_patience = 4;  // evaluations without a 1e-3 val-AUC gain before decay
  double decay_factor = 0.5;
  int64_t max_decays = 4;        // lr floor = lr · decay_factor^max_decays
  double min_improvement = 1e-3;
  // Stop once the lr sits at its floor and another full patience window
  // passes without improvement. Off: always run max_steps.
  bool stop_at_floor = true;
  double lambda_cpi = 1e-3;
  CpiConfig cpi;
  uint64_t seed = 0;
  ModelConfig model = ModelConfig::desk();
  int64_t eval_every = 250;
  int64_t eval_clips_per_video = 4;
  double clip_norm = 0.0;  // global gradient-norm cap; 0 disables
  double init_std = 0.02;

  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
  AdamConfig adam;
  ParamSet<T> m, v;
  int64_t step = 0;

  static OptimizerState zeros(std::shared_ptr<const ParamLayout> layout, AdamConfig adam = {});
};

// One bias-corrected Adam step, element-wise in double precision.
template <typename T>
void adam_update(ParamSet<T>& params, const ParamSet<T>& grads, OptimizerState<T>& opt, double lr);

// Plateau decay bookkeeping; one observe() per validation evaluation.
struct PlateauState {
  double base_lr = 1e-4;
  double lr = 1e-4;
  std::optional<double> best;
  int64_t stale = 0;   // evaluations since the last ≥ min_improvement gain
  int64_t decays = 0;
  bool converged = false;  // at the floor and stale for another full window
};

PlateauState plateau_start(const TrainConfig& cfg);

// Folds one validation AUC into the state and returns the (possibly decayed)
// learning rate.
double lr_schedule(PlateauState& state, double val_auc, const TrainConfig& cfg);

// T contiguous frames from a uniformly random start; the mask is sliced alongside.
Clip sample_clip(const Clip& video, int64_t frames, num::Rng& rng);

// Frames [start, start+frames) of a video; DataError if out of range.
Clip slice_clip(const Clip& video, int64_t start, int64_t frames);

struct StepMetrics {
  double loss = 0.0;  // mean BCE + λ · mean CPI
  double bce = 0.0;
  double cpi = 0.0;
  double grad_norm = 0.0;  // before clipping
};

// Mean-over-batch loss and gradients without updating anything. Clips run in
// parallel; per-clip gradients are summed in batch order, so the result does
// not depend on the thread count.
StepMetrics batch_gradients(const std::vector<Clip>& batch, const ParamSet<float>& params,
                            const TrainConfig& cfg, ParamSet<float>* grads, int64_t step = 0);

// batch_gradients + optional norm clip + one Adam update. NumericError naming
// the step and loss terms if the loss is not finite.
StepMetrics train_step(const std::vector<Clip>& batch, ParamSet<float>& params,
                       OptimizerState<float>& opt, const TrainConfig& cfg, double lr);

// Names of parameters with any element whose gradient is exactly zero on `batch`.
std::vector<std::string> parameter_audit(const std::vector<Clip>& batch,
                                         const ParamSet<float>& params, const TrainConfig& cfg);

// Everything needed to continue a run bit-exactly.
struct TrainState {
  ParamSet<float> params;
  OptimizerState<float> opt;
  PlateauState plateau;
  int64_t step = 0;
  num::Rng rng;
  ParamSet<float> best_params;  // highest validation AUC so far
  double best_auc = -1.0;
  int64_t best_step = 0;
  // Training loss accumulated since the last evaluation.
  double loss_sum = 0.0;
  int64_t loss_count = 0;

  static TrainState fresh(const TrainConfig& cfg);
};

inline constexpr int kCheckpointVersion = 1;

// Directory with meta.json and one little-endian float32 file per parameter
// and optimiser slot. Written to a sibling temporary directory, then renamed.
void save_checkpoint(const TrainState& state, const TrainConfig& cfg,
                     const std::filesystem::path& dir);

// IoError for missing/corrupt files or a version mismatch; DimensionError
// naming the parameter when shapes disagree with `cfg.model`.
TrainState load_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg);

// Reads only the training configuration stored in a checkpoint.
TrainConfig checkpoint_config(const std::filesystem::path& dir);

// Best-validation parameters stored in a checkpoint, plus its training config.
ParamSet<float> load_inference_params(const std::filesystem::path& dir, TrainConfig* cfg = nullptr);

struct EvalPoint {
  int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<EvalPoint> history;
  bool converged = false;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no checkpoints or metrics log
  bool resume = false;            // continue from out_dir/last
  int64_t stop_after = -1;        // stop (and checkpoint) at this step; for tests
  std::function<void(const EvalPoint&)> on_eval;
};

// Full loop: sample batches, step, evaluate on `val` every eval_every steps
// (and at the end), decay on plateaus. With an out_dir it appends one JSON
// line per evaluation to metrics.jsonl and keeps a `last` checkpoint that also
// holds the best-validation parameters.
TrainResult train(const TrainConfig& cfg, const std::vector<Clip>& train_videos,
                  const std::vector<Clip>& val_videos, const TrainOptions& options = {});

}  // namespace lttd
