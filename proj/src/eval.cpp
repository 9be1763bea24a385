#include "lttd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "lttd/dataset.hpp"
#include "lttd/parallel.hpp"

namespace lttd {

using nlohmann::json;

std::vector<int64_t> clip_starts(int64_t length, int64_t frames, int64_t clips, int64_t stride) {
  if (frames <= 0 || clips <= 0 || stride < 0) {
    throw ParameterError("clip_starts: frames and clips must be positive, stride non-negative");
  }
  if (length < frames) {
    throw DataError("video of " + std::to_string(length) + " frames is shorter than the clip length " +
                    std::to_string(frames));
  }
  const int64_t last = length - frames;
  std::vector<int64_t> starts;
  if (stride > 0) {
    for (int64_t s = 0; s <= last && static_cast<int64_t>(starts.size()) < clips; s += stride) {
      starts.push_back(s);
    }
    return starts;
  }
  for (int64_t k = 0; k < clips; ++k) {
    const int64_t s = clips == 1 ? 0 : k * last / (clips - 1);
    if (starts.empty() || starts.back() != s) starts.push_back(s);
  }
  return starts;
}

namespace {

struct ClipOutput {
  double probability;
  std::vector<double> features;
};

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

ClipOutput run_clip(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& clip) {
  num::Tape<float> tape;
  BoundParams<float> bound(tape, params, false);
  const Var<float> patches = tape.leaf(clip_patches<float>(cfg, clip));
  const ModelOutput<float> out = model_forward(cfg, bound, patches);
  const auto& f = out.features.value();
  return {sigmoid(out.logit.value()[0]), std::vector<double>(f.data(), f.data() + f.numel())};
}

struct VideoOutput {
  VideoScore score;
  std::vector<double> features;  // mean over clips
};

VideoOutput run_video(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& video,
                      int64_t clips, int64_t stride) {
  const int64_t t = cfg.lst.frames;
  VideoOutput out;
  out.score.video_id = video.video_id;
  out.score.label = video.label;
  for (int64_t s : clip_starts(video.length(), t, clips, stride)) {
    const ClipOutput c = run_clip(cfg, params, slice_clip(video, s, t));
    out.score.clip_scores.push_back(c.probability);
    if (out.features.empty()) out.features.assign(c.features.size(), 0.0);
    for (size_t i = 0; i < c.features.size(); ++i) out.features[i] += c.features[i];
  }
  out.score.video_score = mean_clip_score(out.score.clip_scores);
  for (double& f : out.features) f /= static_cast<double>(out.score.clip_scores.size());
  return out;
}

std::vector<VideoOutput> run_videos(const ModelConfig& cfg, const ParamSet<float>& params,
                                    const std::vector<Clip>& videos, int64_t clips, int64_t stride) {
  std::vector<VideoOutput> out(videos.size());
  parallel_for(static_cast<int64_t>(videos.size()), [&](int64_t i) {
    out[static_cast<size_t>(i)] = run_video(cfg, params, videos[static_cast<size_t>(i)], clips, stride);
  });
  std::stable_sort(out.begin(), out.end(), [](const VideoOutput& a, const VideoOutput& b) {
    return a.score.video_id < b.score.video_id;
  });
  return out;
}

uint64_t id_hash(const std::string& id) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

double mean_clip_score(const std::vector<double>& clip_scores) {
  if (clip_scores.empty()) throw ParameterError("mean_clip_score: no clip scores");
  double sum = 0.0;
  for (double p : clip_scores) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("mean_clip_score: probability outside [0,1]");
    sum += p;
  }
  return sum / static_cast<double>(clip_scores.size());
}

double score_clip(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& clip) {
  return run_clip(cfg, params, clip).probability;
}

VideoScore score_video(const ModelConfig& cfg, const ParamSet<float>& params, const Clip& video,
                       int64_t clips_per_video, int64_t stride) {
  return run_video(cfg, params, video, clips_per_video, stride).score;
}

std::vector<VideoScore> score_videos(const ModelConfig& cfg, const ParamSet<float>& params,
                                     const std::vector<Clip>& videos, int64_t clips_per_video,
                                     int64_t stride) {
  std::vector<VideoScore> out;
  for (auto& v : run_videos(cfg, params, videos, clips_per_video, stride)) out.push_back(std::move(v.score));
  return out;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw MetricError("auc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw MetricError("auc: NaN score");
  }
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks (1-based) over tie groups; a tie contributes half a pair.
  double pos_rank_sum = 0.0;
  int64_t pos = 0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        pos_rank_sum += mid;
        ++pos;
      }
    }
    i = j;
  }
  const int64_t neg = static_cast<int64_t>(n) - pos;
  if (pos == 0 || neg == 0) {
    throw MetricError("auc: needs both classes, got " + std::to_string(pos) + " positive and " +
                      std::to_string(neg) + " negative");
  }
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double acc(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw DimensionError("acc: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw MetricError("acc: no scores");
  int64_t correct = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    correct += predicted == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

Metrics video_metrics(const std::vector<VideoScore>& scores, double threshold) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& v : scores) {
    s.push_back(v.video_score);
    l.push_back(static_cast<int>(v.label));
  }
  return {auc(s, l), acc(s, l, threshold), static_cast<int64_t>(scores.size())};
}

Metrics evaluate(const ModelConfig& cfg, const ParamSet<float>& params,
                 const std::vector<Clip>& videos, int64_t clips_per_video) {
  return video_metrics(score_videos(cfg, params, videos, clips_per_video));
}

RobustnessTable robustness_sweep(const ModelConfig& cfg, const ParamSet<float>& params,
                                 const std::vector<Clip>& videos,
                                 const std::vector<PerturbKind>& kinds,
                                 const std::vector<int>& levels, int64_t clips_per_video,
                                 uint64_t seed) {
  RobustnessTable table;
  table.kinds = kinds;
  table.levels = levels;
  table.clean_auc = evaluate(cfg, params, videos, clips_per_video).auc;
  std::vector<Clip> perturbed(videos.size());
  for (PerturbKind kind : kinds) {
    std::vector<double> row;
    double sum = 0.0;
    int64_t counted = 0;
    for (int level : levels) {
      parallel_for(static_cast<int64_t>(videos.size()), [&](int64_t i) {
        const Clip& v = videos[static_cast<size_t>(i)];
        perturbed[static_cast<size_t>(i)] =
            apply_perturbation(v, kind, level, num::mix_seed(seed, id_hash(v.video_id)));
      });
      const double a = evaluate(cfg, params, perturbed, clips_per_video).auc;
      row.push_back(a);
      if (level >= 1) {
        sum += a;
        ++counted;
      }
    }
    table.auc.push_back(std::move(row));
    table.mean_auc.push_back(counted ? sum / static_cast<double>(counted) : std::nan(""));
  }
  return table;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  int64_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::nan("");
}

}  // namespace

std::string robustness_json(const RobustnessTable& table) {
  json kinds = json::array();
  for (size_t k = 0; k < table.kinds.size(); ++k) {
    kinds.push_back({{"kind", perturb_name(table.kinds[k])},
                     {"auc", table.auc[k]},
                     {"mean_auc", number_or_null(table.mean_auc[k])}});
  }
  const json doc = {{"clean_auc", table.clean_auc},
                    {"levels", table.levels},
                    {"kinds", kinds},
                    {"average_auc", number_or_null(mean_of(table.mean_auc))}};
  return doc.dump(2) + "\n";
}

std::string robustness_text(const RobustnessTable& table) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-18s", "kind");
  os << buf;
  for (int l : table.levels) {
    std::snprintf(buf, sizeof(buf), "%8s", ("L" + std::to_string(l)).c_str());
    os << buf;
  }
  os << "    mean\n";
  for (size_t k = 0; k < table.kinds.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%-18s", perturb_name(table.kinds[k]));
    os << buf;
    for (double a : table.auc[k]) {
      std::snprintf(buf, sizeof(buf), "%8.4f", a);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "%8.4f\n", table.mean_auc[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "clean AUC %.4f, average over kinds %.4f\n", table.clean_auc,
                mean_of(table.mean_auc));
  os << buf;
  return os.str();
}

TrainConfig ablation_config(Variant variant, const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.model = base.model.with_variant(variant);
  if (variant == Variant::kNoCpi) cfg.lambda_cpi = 0.0;
  cfg.validate();
  return cfg;
}

AblationRow run_ablation(Variant variant, const TrainConfig& base,
                         const std::vector<Clip>& train_videos, const std::vector<Clip>& val_videos,
                         const std::vector<Clip>& test_videos, const TrainOptions& options) {
  const TrainConfig cfg = ablation_config(variant, base);
  const TrainResult r = train(cfg, train_videos, val_videos, options);
  AblationRow row;
  row.variant = variant;
  row.steps = r.state.step;
  row.best_val_auc = r.state.best_auc;
  row.test = evaluate(cfg.model, r.state.best_params, test_videos, cfg.eval_clips_per_video);
  return row;
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"variant", variant_name(r.variant)},
                   {"test_auc", r.test.auc},
                   {"test_acc", r.test.acc},
                   {"test_videos", r.test.videos},
                   {"steps", r.steps},
                   {"best_val_auc", r.best_val_auc}});
  }
  return json{{"rows", out}}.dump(2) + "\n";
}

std::string ablation_text(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-8s %9s %9s %8s %12s\n", "variant", "test_AUC", "test_ACC",
                "steps", "best_val_AUC");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %9.4f %9.4f %8lld %12.4f\n", variant_name(r.variant).c_str(),
                  r.test.auc, r.test.acc, static_cast<long long>(r.steps), r.best_val_auc);
    os << buf;
  }
  return os.str();
}

void export_features(const ModelConfig& cfg, const ParamSet<float>& params,
                     const std::vector<Clip>& videos, const std::filesystem::path& path,
                     int64_t clips_per_video) {
  const auto outputs = run_videos(cfg, params, videos, clips_per_video, 0);
  std::ostringstream os;
  os << "video_id\tlabel";
  for (int64_t d = 0; d < cfg.lst.dim; ++d) os << "\tf" << d;
  os << "\n";
  char buf[32];
  for (const auto& v : outputs) {
    os << v.score.video_id << "\t" << static_cast<int>(v.score.label);
    for (double f : v.features) {
      std::snprintf(buf, sizeof(buf), "\t%.9g", f);
      os << buf;
    }
    os << "\n";
  }
  write_file_atomic(path, os.str());
}

}  // namespace lttd
