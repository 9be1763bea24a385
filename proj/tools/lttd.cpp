// lttd: generate synthetic data, train, evaluate, sweep perturbations, run
// ablations and export features. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "lttd/config_json.hpp"
#include "lttd/dataset.hpp"
#include "lttd/eval.hpp"
#include "lttd/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_json(const std::string& path, const json& doc) {
  if (path.empty()) return;
  lttd::write_file_atomic(path, doc.dump(2) + "\n");
}

void write_json_text(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  lttd::write_file_atomic(path, text);
}

// "0..5", "3" or "0,2,4".
std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots)), hi = std::stoi(text.substr(dots + 2));
      if (hi < lo) throw UsageError("--levels range '" + text + "' is empty");
      for (int l = lo; l <= hi; ++l) out.push_back(l);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    }
  } catch (const std::logic_error&) {
    throw UsageError("--levels expects 'a..b' or a comma list, got '" + text + "'");
  }
  for (int l : out) {
    if (l < 0 || l > lttd::kMaxSeverity) {
      throw UsageError("--levels: level " + std::to_string(l) + " outside 0.." +
                       std::to_string(lttd::kMaxSeverity));
    }
  }
  if (out.empty()) throw UsageError("--levels is empty");
  return out;
}

lttd::TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return lttd::TrainConfig{};
  const json j = lttd::read_json_file(path);
  try {
    return lttd::train_config_from_json(j);
  } catch (const lttd::ParameterError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

lttd::Manifest load_manifest(const std::string& path) { return lttd::read_manifest(path); }

std::vector<lttd::Clip> load(const lttd::Manifest& m, lttd::Split split) {
  std::vector<lttd::Clip> v = lttd::load_split(m, split);
  if (v.empty()) {
    throw lttd::DataError(std::string("manifest has no ") + lttd::split_name(split) + " videos");
  }
  return v;
}

struct Model {
  lttd::TrainConfig cfg;
  lttd::ParamSet<float> params;
};

Model load_model(const std::string& checkpoint) {
  if (!fs::exists(fs::path(checkpoint) / "meta.json")) {
    throw lttd::IoError("no checkpoint at " + checkpoint);
  }
  Model m;
  m.params = lttd::load_inference_params(checkpoint, &m.cfg);
  return m;
}

json eval_point_json(const lttd::EvalPoint& p) {
  return {{"step", p.step}, {"lr", p.lr}, {"train_loss", p.train_loss}, {"val_auc", p.val_auc},
          {"val_acc", p.val_acc}};
}

// ------------------------------------------------------------------ commands

struct GenArgs {
  std::string out, config;
  int64_t videos = 300;
  int64_t val = -1, test = -1;
  uint64_t seed = 0;
  int64_t size = 64, frames = 16;
  double amp = -1.0;
};

int cmd_gen_data(const GenArgs& a) {
  lttd::SynthConfig cfg;
  if (!a.config.empty()) {
    try {
      cfg = lttd::synth_config_from_json(lttd::read_json_file(a.config));
    } catch (const lttd::ParameterError& e) {
      throw UsageError(a.config + ": " + e.what());
    }
  }
  cfg.seed = a.seed;
  cfg.height = cfg.width = a.size;
  cfg.frames = a.frames;
  if (a.amp > 0.0) cfg.inconsistency_amp = a.amp;
  try {
    cfg.validate();
  } catch (const lttd::ParameterError& e) {
    throw UsageError(e.what());
  }
  // Default split is 4:1:1, with at least two held-out videos per split.
  const int64_t held = std::max<int64_t>(2, a.videos / 6);
  lttd::SplitCounts counts;
  counts.val = a.val >= 0 ? a.val : held;
  counts.test = a.test >= 0 ? a.test : held;
  counts.train = a.videos - counts.val - counts.test;
  if (counts.train < 1) throw UsageError("--videos too small for the requested val/test counts");
  const fs::path manifest = lttd::make_dataset(cfg, counts, a.out);
  std::cout << manifest.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, config, out, json_path;
  bool resume = false;
  int64_t steps = -1, batch = -1, eval_every = -1;
  double lr = -1.0;
  int64_t seed = -1;
};

int cmd_train(const TrainArgs& a) {
  lttd::TrainConfig cfg = load_train_config(a.config);
  if (a.steps >= 0) cfg.max_steps = a.steps;
  if (a.batch > 0) cfg.batch_size = a.batch;
  if (a.eval_every > 0) cfg.eval_every = a.eval_every;
  if (a.lr > 0.0) cfg.lr = a.lr;
  if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
  try {
    cfg.validate();
  } catch (const lttd::ParameterError& e) {
    throw UsageError(e.what());
  }
  const lttd::Manifest m = load_manifest(a.manifest);
  const auto train_set = load(m, lttd::Split::kTrain);
  const auto val_set = load(m, lttd::Split::kVal);

  lttd::TrainOptions opts;
  opts.out_dir = a.out;
  opts.resume = a.resume;
  opts.on_eval = [](const lttd::EvalPoint& p) {
    std::printf("step %6lld  lr %.3g  train_loss %.5f  val_auc %.4f  val_acc %.4f\n",
                static_cast<long long>(p.step), p.lr, p.train_loss, p.val_auc, p.val_acc);
    std::fflush(stdout);
  };
  const lttd::TrainResult r = lttd::train(cfg, train_set, val_set, opts);
  std::printf("finished at step %lld%s; best val AUC %.4f at step %lld; checkpoint %s\n",
              static_cast<long long>(r.state.step), r.converged ? " (converged)" : "",
              r.state.best_auc, static_cast<long long>(r.state.best_step),
              (fs::path(a.out) / "last").string().c_str());
  json history = json::array();
  for (const auto& p : r.history) history.push_back(eval_point_json(p));
  write_json(a.json_path, {{"steps", r.state.step},
                           {"converged", r.converged},
                           {"best_val_auc", r.state.best_auc},
                           {"best_step", r.state.best_step},
                           {"history", history}});
  return 0;
}

struct EvalArgs {
  std::string checkpoint, manifest, split = "test", json_path;
  int64_t clips = -1;
};

int cmd_eval(const EvalArgs& a) {
  const lttd::Split split = lttd::parse_split(a.split);
  const Model model = load_model(a.checkpoint);
  const lttd::Manifest m = load_manifest(a.manifest);
  const auto videos = load(m, split);
  const int64_t clips = a.clips > 0 ? a.clips : model.cfg.eval_clips_per_video;
  const auto scores = lttd::score_videos(model.cfg.model, model.params, videos, clips);
  const lttd::Metrics metrics = lttd::video_metrics(scores);
  std::printf("split %s  videos %lld  ACC %.4f  AUC %.4f\n", a.split.c_str(),
              static_cast<long long>(metrics.videos), metrics.acc, metrics.auc);
  json rows = json::array();
  for (const auto& s : scores) {
    rows.push_back({{"video_id", s.video_id},
                    {"label", static_cast<int>(s.label)},
                    {"video_score", s.video_score},
                    {"clip_scores", s.clip_scores}});
  }
  write_json(a.json_path, {{"split", a.split},
                           {"videos", metrics.videos},
                           {"auc", metrics.auc},
                           {"acc", metrics.acc},
                           {"scores", rows}});
  return 0;
}

struct PerturbArgs {
  std::string checkpoint, manifest, split = "test", kind = "all", levels = "0..5", json_path;
  uint64_t seed = 0;
  int64_t clips = -1;
};

int cmd_perturb(const PerturbArgs& a) {
  std::vector<lttd::PerturbKind> kinds;
  if (a.kind == "all") {
    kinds.assign(lttd::kAllPerturbKinds.begin(), lttd::kAllPerturbKinds.end());
  } else {
    try {
      kinds.push_back(lttd::parse_perturb_kind(a.kind));
    } catch (const lttd::ParameterError& e) {
      throw UsageError(e.what());
    }
  }
  const std::vector<int> levels = parse_levels(a.levels);
  const lttd::Split split = lttd::parse_split(a.split);
  const Model model = load_model(a.checkpoint);
  const auto videos = load(load_manifest(a.manifest), split);
  const int64_t clips = a.clips > 0 ? a.clips : model.cfg.eval_clips_per_video;
  const lttd::RobustnessTable t =
      lttd::robustness_sweep(model.cfg.model, model.params, videos, kinds, levels, clips, a.seed);
  std::cout << lttd::robustness_text(t);
  write_json_text(a.json_path, lttd::robustness_json(t));
  return 0;
}

struct AblateArgs {
  std::string manifest, config, out, json_path;
  std::vector<std::string> variants;
  int64_t steps = -1;
};

int cmd_ablate(const AblateArgs& a) {
  lttd::TrainConfig cfg = load_train_config(a.config);
  if (a.steps >= 0) cfg.max_steps = a.steps;
  std::vector<lttd::Variant> variants;
  for (const std::string& name : a.variants) {
    if (name == "all") {
      variants = {lttd::Variant::kFull, lttd::Variant::kNoLst, lttd::Variant::kNoCpi,
                  lttd::Variant::kNoCpa};
      break;
    }
    try {
      variants.push_back(lttd::parse_variant(name));
    } catch (const lttd::ParameterError& e) {
      throw UsageError(e.what());
    }
  }
  const lttd::Manifest m = load_manifest(a.manifest);
  const auto train_set = load(m, lttd::Split::kTrain);
  const auto val_set = load(m, lttd::Split::kVal);
  const auto test_set = load(m, lttd::Split::kTest);
  std::vector<lttd::AblationRow> rows;
  for (lttd::Variant v : variants) {
    lttd::TrainOptions opts;
    if (!a.out.empty()) opts.out_dir = fs::path(a.out) / lttd::variant_name(v);
    std::fprintf(stderr, "training %s\n", lttd::variant_name(v).c_str());
    rows.push_back(lttd::run_ablation(v, cfg, train_set, val_set, test_set, opts));
  }
  std::cout << lttd::ablation_text(rows);
  write_json_text(a.json_path, lttd::ablation_json(rows));
  return 0;
}

struct ExportArgs {
  std::string checkpoint, manifest, split = "test", out;
  int64_t clips = -1;
};

int cmd_export(const ExportArgs& a) {
  const lttd::Split split = lttd::parse_split(a.split);
  const Model model = load_model(a.checkpoint);
  const auto videos = load(load_manifest(a.manifest), split);
  const int64_t clips = a.clips > 0 ? a.clips : model.cfg.eval_clips_per_video;
  lttd::export_features(model.cfg.model, model.params, videos, a.out, clips);
  std::printf("%zu videos -> %s\n", videos.size(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local temporal inconsistency deepfake detector"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset and its manifest");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--videos", gen.videos, "Total number of videos")->check(CLI::PositiveNumber);
  g->add_option("--val", gen.val, "Validation videos (default: videos/6, at least 2)");
  g->add_option("--test", gen.test, "Test videos (default: videos/6, at least 2)");
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--size", gen.size, "Frame height and width")->check(CLI::PositiveNumber);
  g->add_option("--frames", gen.frames, "Frames per video")->check(CLI::PositiveNumber);
  g->add_option("--amp", gen.amp, "Inconsistency amplitude of fakes");
  g->add_option("--config", gen.config, "SynthConfig JSON; flags override it");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--manifest", tr.manifest, "Dataset manifest")->required();
  t->add_option("--config", tr.config, "TrainConfig JSON (defaults if omitted)");
  t->add_option("--out", tr.out, "Output directory for checkpoints and metrics")->required();
  t->add_flag("--resume", tr.resume, "Continue from OUT/last");
  t->add_option("--steps", tr.steps, "Override max_steps");
  t->add_option("--lr", tr.lr, "Override lr");
  t->add_option("--batch", tr.batch, "Override batch_size");
  t->add_option("--eval-every", tr.eval_every, "Override eval_every");
  t->add_option("--seed", tr.seed, "Override seed");
  t->add_option("--json", tr.json_path, "Write the run summary as JSON");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Video-level ACC/AUC of a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  e->add_option("--split", ev.split, "train, val or test");
  e->add_option("--clips", ev.clips, "Clips per video (default from the checkpoint)");
  e->add_option("--json", ev.json_path, "Write metrics and per-video scores as JSON");

  PerturbArgs pe;
  auto* p = app.add_subcommand("perturb", "Robustness sweep over perturbation levels");
  p->add_option("--checkpoint", pe.checkpoint, "Checkpoint directory")->required();
  p->add_option("--manifest", pe.manifest, "Dataset manifest")->required();
  p->add_option("--split", pe.split, "train, val or test");
  p->add_option("--kind", pe.kind, "Perturbation kind or 'all'");
  p->add_option("--levels", pe.levels, "Levels as 'a..b' or a comma list");
  p->add_option("--seed", pe.seed, "Perturbation seed");
  p->add_option("--clips", pe.clips, "Clips per video (default from the checkpoint)");
  p->add_option("--json", pe.json_path, "Write the table as JSON");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train and test ablation variants");
  a->add_option("--manifest", ab.manifest, "Dataset manifest")->required();
  a->add_option("--config", ab.config, "Base TrainConfig JSON");
  a->add_option("--variant", ab.variants, "full, no_lst, no_cpi, no_cpa or all")->required();
  a->add_option("--out", ab.out, "Directory for per-variant checkpoints");
  a->add_option("--steps", ab.steps, "Override max_steps");
  a->add_option("--json", ab.json_path, "Write the rows as JSON");

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "Export head-input features as TSV");
  x->add_option("--checkpoint", ex.checkpoint, "Checkpoint directory")->required();
  x->add_option("--manifest", ex.manifest, "Dataset manifest")->required();
  x->add_option("--split", ex.split, "train, val or test");
  x->add_option("--clips", ex.clips, "Clips per video (default from the checkpoint)");
  x->add_option("--out", ex.out, "Output TSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*p) return cmd_perturb(pe);
    if (*a) return cmd_ablate(ab);
    if (*x) return cmd_export(ex);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
