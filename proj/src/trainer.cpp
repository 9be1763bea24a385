#include <cmath>
#include <fstream>
#include <json.hpp>

#include "lttd/dataset.hpp"
#include "lttd/eval.hpp"
#include "lttd/train.hpp"

namespace lttd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json eval_json(const EvalPoint& p) {
  return {{"step", p.step}, {"lr", p.lr}, {"train_loss", p.train_loss}, {"val_auc", p.val_auc},
          {"val_acc", p.val_acc}};
}

EvalPoint eval_point(const json& j) {
  return {j.at("step").get<int64_t>(), j.at("lr").get<double>(), j.at("train_loss").get<double>(),
          j.at("val_auc").get<double>(), j.at("val_acc").get<double>()};
}

// Entries of an existing metrics log up to and including `step`.
std::vector<EvalPoint> read_history(const fs::path& path, int64_t step) {
  std::vector<EvalPoint> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const EvalPoint p = eval_point(json::parse(line));
      if (p.step <= step) out.push_back(p);
    } catch (const json::exception& e) {
      throw IoError("malformed metrics line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

std::string history_text(const std::vector<EvalPoint>& history) {
  std::string s;
  for (const EvalPoint& p : history) s += eval_json(p).dump() + "\n";
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<Clip>& train_videos,
                  const std::vector<Clip>& val_videos, const TrainOptions& options) {
  cfg.validate();
  if (train_videos.empty()) throw DataError("train: no training videos");
  for (const Clip& v : train_videos) {
    if (v.length() < cfg.model.lst.frames) {
      throw DataError("video '" + v.video_id + "' has " + std::to_string(v.length()) +
                      " frames, fewer than the clip length " + std::to_string(cfg.model.lst.frames));
    }
  }
  const bool persist = !options.out_dir.empty();
  const fs::path last_dir = options.out_dir / "last";
  const fs::path metrics_path = options.out_dir / "metrics.jsonl";

  TrainResult result;
  TrainState& s = result.state;
  if (options.resume) {
    if (!persist) throw ParameterError("train: resume needs an output directory");
    s = load_checkpoint(last_dir, cfg);
    result.history = read_history(metrics_path, s.step);
  } else {
    s = TrainState::fresh(cfg);
  }
  if (persist) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
    write_file_atomic(metrics_path, history_text(result.history));
  }
  auto append_metrics = [&](const EvalPoint& p) {
    if (!persist) return;
    std::ofstream out(metrics_path, std::ios::app);
    out << eval_json(p).dump() << "\n";
    if (!out) throw IoError("cannot append to " + metrics_path.string());
  };

  const int64_t frames = cfg.model.lst.frames;
  std::vector<Clip> batch(static_cast<size_t>(cfg.batch_size));
  while (s.step < cfg.max_steps && !s.plateau.converged) {
    for (Clip& c : batch) {
      const auto idx = s.rng.below(train_videos.size());
      c = sample_clip(train_videos[idx], frames, s.rng);
    }
    const double lr = s.plateau.lr;
    const StepMetrics m = train_step(batch, s.params, s.opt, cfg, lr);
    s.step += 1;
    s.loss_sum += m.loss;
    s.loss_count += 1;

    if (s.step % cfg.eval_every == 0 || s.step == cfg.max_steps) {
      const Metrics val = evaluate(cfg.model, s.params, val_videos, cfg.eval_clips_per_video);
      EvalPoint p{s.step, lr, s.loss_sum / static_cast<double>(s.loss_count), val.auc, val.acc};
      s.loss_sum = 0.0;
      s.loss_count = 0;
      if (val.auc > s.best_auc) {
        s.best_auc = val.auc;
        s.best_step = s.step;
        s.best_params = s.params;
      }
      lr_schedule(s.plateau, val.auc, cfg);
      result.history.push_back(p);
      append_metrics(p);
      if (persist) save_checkpoint(s, cfg, last_dir);
      if (options.on_eval) options.on_eval(p);
    } else if (persist && s.step == options.stop_after) {
      save_checkpoint(s, cfg, last_dir);
    }
    if (s.step == options.stop_after) break;
  }
  result.converged = s.plateau.converged;
  return result;
}

}  // namespace lttd
