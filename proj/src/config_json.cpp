#include "lttd/config_json.hpp"

#include <fstream>
#include <set>

namespace lttd {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects leftovers.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ParameterError("config: '" + path_ + "' must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int64_t>();
    }
  }
  void get(const std::string& key, uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParameterError("unknown config key '" + field(it.key()) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& key, const char* what) const {
    throw ParameterError("config: '" + field(key) + "' must be " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelConfig preset(const std::string& name, const std::string& path) {
  if (name == "paper") return ModelConfig::paper();
  if (name == "desk") return ModelConfig::desk();
  if (name == "toy") return ModelConfig::toy();
  throw ParameterError("config: '" + path + "' has unknown preset '" + name +
                       "' (expected paper, desk or toy)");
}

const char* reduction_name(num::Reduction r) { return r == num::Reduction::kSum ? "sum" : "mean"; }

}  // namespace

json to_json(const ModelConfig& cfg) {
  const LstConfig& l = cfg.lst;
  const CpaConfig& c = cfg.cpa;
  return {{"variant", variant_name(cfg.variant)},
          {"lst",
           {{"channels", l.channels},
            {"patch", l.patch},
            {"dim", l.dim},
            {"frames", l.frames},
            {"temporal_filters", l.temporal_filters},
            {"pool", l.pool},
            {"stages", l.stages},
            {"blocks_per_stage", l.blocks_per_stage},
            {"heads", l.heads},
            {"mlp_ratio", l.mlp_ratio},
            {"low_level_enhancement", l.low_level_enhancement},
            {"ln_eps", l.ln_eps}}},
          {"cpa",
           {{"blocks", c.blocks},
            {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio},
            {"ln_eps", c.ln_eps},
            {"aggregation", c.aggregation}}}};
}

ModelConfig model_config_from_json(const json& j, const std::string& path) {
  if (j.is_string()) return preset(j.get<std::string>(), path);
  ObjectReader r(j, path);
  ModelConfig cfg = ModelConfig::desk();
  std::string base;
  r.get("preset", base);
  if (!base.empty()) cfg = preset(base, r.field("preset"));
  std::string variant = variant_name(cfg.variant);
  r.get("variant", variant);
  if (const json* lj = r.find("lst")) {
    ObjectReader l(*lj, r.field("lst"));
    LstConfig& c = cfg.lst;
    l.get("channels", c.channels);
    l.get("patch", c.patch);
    l.get("dim", c.dim);
    l.get("frames", c.frames);
    l.get("temporal_filters", c.temporal_filters);
    l.get("pool", c.pool);
    l.get("stages", c.stages);
    l.get("blocks_per_stage", c.blocks_per_stage);
    l.get("heads", c.heads);
    l.get("mlp_ratio", c.mlp_ratio);
    l.get("low_level_enhancement", c.low_level_enhancement);
    l.get("ln_eps", c.ln_eps);
    l.finish();
  }
  if (const json* cj = r.find("cpa")) {
    ObjectReader c(*cj, r.field("cpa"));
    c.get("blocks", cfg.cpa.blocks);
    c.get("heads", cfg.cpa.heads);
    c.get("mlp_ratio", cfg.cpa.mlp_ratio);
    c.get("ln_eps", cfg.cpa.ln_eps);
    c.get("aggregation", cfg.cpa.aggregation);
    c.finish();
  }
  r.finish();
  try {
    cfg.variant = parse_variant(variant);
  } catch (const ParameterError& e) {
    throw ParameterError("config: '" + r.field("variant") + "': " + e.what());
  }
  // Only the explicit switches of a preset-less variant are derived from it.
  const bool explicit_switches = (j.contains("lst") && j["lst"].contains("low_level_enhancement")) ||
                                 (j.contains("cpa") && j["cpa"].contains("aggregation"));
  if (!explicit_switches) cfg = cfg.with_variant(cfg.variant);
  cfg.validate();
  return cfg;
}

json to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"batch_size", cfg.batch_size},
          {"max_steps", cfg.max_steps},
          {"plateau_patience", cfg.plateau_patience},
          {"decay_factor", cfg.decay_factor},
          {"max_decays", cfg.max_decays},
          {"min_improvement", cfg.min_improvement},
          {"stop_at_floor", cfg.stop_at_floor},
          {"lambda_cpi", cfg.lambda_cpi},
          {"cpi", {{"margin", cfg.cpi.margin}, {"reduction", reduction_name(cfg.cpi.reduction)}}},
          {"seed", cfg.seed},
          {"model", to_json(cfg.model)},
          {"eval_every", cfg.eval_every},
          {"eval_clips_per_video", cfg.eval_clips_per_video},
          {"clip_norm", cfg.clip_norm},
          {"init_std", cfg.init_std}};
}

TrainConfig train_config_from_json(const json& j) {
  ObjectReader r(j, "");
  TrainConfig cfg;
  r.get("lr", cfg.lr);
  r.get("batch_size", cfg.batch_size);
  r.get("max_steps", cfg.max_steps);
  r.get("plateau_patience", cfg.plateau_patience);
  r.get("decay_factor", cfg.decay_factor);
  r.get("max_decays", cfg.max_decays);
  r.get("min_improvement", cfg.min_improvement);
  r.get("stop_at_floor", cfg.stop_at_floor);
  r.get("lambda_cpi", cfg.lambda_cpi);
  if (const json* cj = r.find("cpi")) {
    ObjectReader c(*cj, "cpi");
    c.get("margin", cfg.cpi.margin);
    std::string red = reduction_name(cfg.cpi.reduction);
    c.get("reduction", red);
    if (red == "sum") {
      cfg.cpi.reduction = num::Reduction::kSum;
    } else if (red == "mean") {
      cfg.cpi.reduction = num::Reduction::kMean;
    } else {
      throw ParameterError("config: 'cpi.reduction' must be \"sum\" or \"mean\"");
    }
    c.finish();
  }
  r.get("seed", cfg.seed);
  if (const json* mj = r.find("model")) cfg.model = model_config_from_json(*mj, "model");
  r.get("eval_every", cfg.eval_every);
  r.get("eval_clips_per_video", cfg.eval_clips_per_video);
  r.get("clip_norm", cfg.clip_norm);
  r.get("init_std", cfg.init_std);
  r.finish();
  cfg.validate();
  return cfg;
}

json to_json(const SynthConfig& cfg) {
  return {{"height", cfg.height},
          {"width", cfg.width},
          {"frames", cfg.frames},
          {"center_min", cfg.center_min},
          {"center_max", cfg.center_max},
          {"axis_min", cfg.axis_min},
          {"axis_max", cfg.axis_max},
          {"edge_px", cfg.edge_px},
          {"shake_amp", cfg.shake_amp},
          {"inconsistency_amp", cfg.inconsistency_amp},
          {"texture_octaves", cfg.texture_octaves},
          {"sensor_noise", cfg.sensor_noise},
          {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  ObjectReader r(j, "");
  SynthConfig cfg;
  r.get("height", cfg.height);
  r.get("width", cfg.width);
  r.get("frames", cfg.frames);
  r.get("center_min", cfg.center_min);
  r.get("center_max", cfg.center_max);
  r.get("axis_min", cfg.axis_min);
  r.get("axis_max", cfg.axis_max);
  r.get("edge_px", cfg.edge_px);
  r.get("shake_amp", cfg.shake_amp);
  r.get("inconsistency_amp", cfg.inconsistency_amp);
  r.get("texture_octaves", cfg.texture_octaves);
  r.get("sensor_noise", cfg.sensor_noise);
  r.get("seed", cfg.seed);
  r.finish();
  cfg.validate();
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace lttd
