#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lttd/perturb.hpp"
#include "lttd/train.hpp"

namespace lttd {

struct VideoScore {
  std::string video_id;
  Label label = Label::kReal;
  std::vector<double> clip_scores;  // probabilities
  double video_score = 0.0;         // mean of clip_scores
};

// Clip start indices for a video of `length` frames. stride == 0: `clips`
// starts spread evenly over [0, length − frames] (rounded down, duplicates
// dropped). stride > 0: 0, stride, 2·stride, … up to length − frames, at most
// `clips` of them. DataError if length < frames.
std::vector<int64_t> clip_starts(int64_t length, int64_t frames, int64_t clips, int64_t stride = 0);

// Video score from its clip probabilities: their mean. ParameterError when
// empty or when a probability lies outside [0, 1].
double mean_clip_score(const std::vector<double>& clip_scores);

// Probability of one clip (sigmoid of the logit).
double score_clip(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& clip);

VideoScore score_video(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& video,
                       int64_t clips_per_video = 4, int64_t stride = 0);

// Scores every video in parallel; results ordered by video_id.
std::vector<VideoScore> score_videos(const ModelConfig& cfg, const ParamSet<float>& params,
                                     const std::vector<Clip>& videos, int64_t clips_per_video = 4,
                                     int64_t stride = 0);

// Mann–Whitney AUC with ties credited 0.5; label 1 is the positive (fake)
// class. MetricError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction correct when score >= threshold predicts fake.
double acc(const std::vector<double>& scores, const std::vector<int>& labels,
           double threshold = 0.5);

struct Metrics {
  double auc = 0.0;
  double acc = 0.0;
  int64_t videos = 0;
};

Metrics video_metrics(const std::vector<VideoScore>& scores, double threshold = 0.5);

Metrics evaluate(const ModelConfig& cfg, const ParamSet<float>& params,
                 const std::vector<Clip>& videos, int64_t clips_per_video = 4);

struct RobustnessTable {
  std::vector<PerturbKind> kinds;
  std::vector<int> levels;             // columns, normally 0..5
  std::vector<std::vector<double>> auc;  // [kind][level column]
  double clean_auc = 0.0;
  std::vector<double> mean_auc;        // per kind, over levels 1..5 present in `levels`
};

// AUC of every (kind, level) cell; perturbations are seeded per video so each
// cell is deterministic.
RobustnessTable robustness_sweep(const ModelConfig& cfg, const ParamSet<float>& params,
                                 const std::vector<Clip>& videos,
                                 const std::vector<PerturbKind>& kinds,
                                 const std::vector<int>& levels, int64_t clips_per_video = 4,
                                 uint64_t seed = 0);

std::string robustness_json(const RobustnessTable& table);
std::string robustness_text(const RobustnessTable& table);

struct AblationRow {
  Variant variant = Variant::kFull;
  Metrics test;
  int64_t steps = 0;
  double best_val_auc = 0.0;
};

// Trains `variant` from scratch with the shared seed of `cfg` and evaluates
// the best-validation parameters on `test`.
AblationRow run_ablation(Variant variant, const TrainConfig& cfg,
                         const std::vector<Clip>& train_videos, const std::vector<Clip>& val_videos,
                         const std::vector<Clip>& test_videos, const TrainOptions& options = {});

// The configuration run_ablation trains for a variant: architecture switches
// applied, and lambda_cpi = 0 for no_cpi.
TrainConfig ablation_config(Variant variant, const TrainConfig& base);

std::string ablation_json(const std::vector<AblationRow>& rows);
std::string ablation_text(const std::vector<AblationRow>& rows);

// Tab-separated: video_id, label, then the D-dimensional head input (mean
// over the clips of score_video). One row per video, in video_id order.
void export_features(const ModelConfig& cfg, const ParamSet<float>& params,
                     const std::vector<Clip>& videos, const std::filesystem::path& path,
                     int64_t clips_per_video = 4);

}  // namespace lttd
