#include <bit>
#include <map>
#include <cstring>
#include <fstream>

#include "lttd/config_json.hpp"
#include "lttd/dataset.hpp"
#include "lttd/train.hpp"

namespace lttd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSlots[] = {"param", "adam_m", "adam_v", "best"};

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
  return h;
}

std::string encode(const Tensor<float>& t) {
  std::string out(static_cast<size_t>(t.numel()) * 4, '\0');
  for (int64_t i = 0; i < t.numel(); ++i) {
    uint32_t bits = std::bit_cast<uint32_t>(t[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(out.data() + i * 4, &bits, 4);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

Tensor<float> decode(const std::string& bytes, const Shape& shape, const fs::path& path) {
  Tensor<float> t(shape);
  if (bytes.size() != static_cast<size_t>(t.numel()) * 4) {
    throw IoError("checkpoint file " + path.string() + " has " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(t.numel() * 4));
  }
  for (int64_t i = 0; i < t.numel(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    t[i] = std::bit_cast<float>(bits);
  }
  return t;
}

std::string file_name(const char* slot, const std::string& param) {
  return std::string(slot) + "." + param + ".f32";
}

const ParamSet<float>& slot_set(const TrainState& s, int slot) {
  switch (slot) {
    case 0: return s.params;
    case 1: return s.opt.m;
    case 2: return s.opt.v;
    default: return s.best_params;
  }
}

ParamSet<float>& slot_set(TrainState& s, int slot) {
  return const_cast<ParamSet<float>&>(slot_set(static_cast<const TrainState&>(s), slot));
}

json read_meta(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw IoError("no checkpoint at " + dir.string() + " (missing meta.json)");
  json meta = read_json_file(meta_path);
  if (!meta.is_object() || !meta.contains("format_version")) {
    throw IoError("checkpoint " + dir.string() + ": meta.json lacks format_version");
  }
  const int version = meta["format_version"].get<int>();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + dir.string() + ": format version " + std::to_string(version) +
                  ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  return meta;
}

// Loads the requested slots into sets shaped by `layout`.
void load_slots(const fs::path& dir, const json& meta, const std::shared_ptr<const ParamLayout>& layout,
                const std::vector<int>& slots, TrainState& state) {
  std::map<std::string, const json*> stored;
  for (const json& t : meta.at("tensors")) stored[t.at("name").get<std::string>()] = &t;
  for (const auto& e : layout->entries()) {
    if (!stored.count(e.name)) {
      throw DimensionError("checkpoint " + dir.string() + " has no parameter '" + e.name +
                           "' required by the model config");
    }
  }
  for (const auto& [name, t] : stored) {
    if (!layout->contains(name)) {
      throw DimensionError("checkpoint parameter '" + name + "' does not exist in the model config");
    }
    const Shape shape = t->at("shape").get<Shape>();
    const Shape& expect = layout->entries()[layout->index(name)].shape;
    if (shape != expect) {
      throw DimensionError("checkpoint parameter '" + name + "' has shape " + num::shape_str(shape) +
                           " but the model config expects " + num::shape_str(expect));
    }
  }
  for (int slot : slots) {
    ParamSet<float>& set = slot_set(state, slot);
    set.layout = layout;
    set.tensors.clear();
    for (const auto& e : layout->entries()) {
      const json& t = *stored[e.name];
      const fs::path path = dir / file_name(kSlots[slot], e.name);
      const std::string bytes = read_file(path);
      if (fnv1a(bytes) != t.at("checksums").at(kSlots[slot]).get<uint64_t>()) {
        throw IoError("checkpoint file " + path.string() + " is corrupt (checksum mismatch)");
      }
      set.tensors.push_back(decode(bytes, e.shape, path));
    }
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const fs::path& dir) {
  const fs::path tmp = dir.parent_path() / ("." + dir.filename().string() + ".tmp");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  json tensors = json::array();
  const auto& entries = state.params.layout->entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    json sums;
    for (int slot = 0; slot < 4; ++slot) {
      const std::string bytes = encode(slot_set(state, slot).tensors[i]);
      write_file_atomic(tmp / file_name(kSlots[slot], entries[i].name), bytes);
      sums[kSlots[slot]] = fnv1a(bytes);
    }
    tensors.push_back({{"name", entries[i].name}, {"shape", entries[i].shape}, {"checksums", sums}});
  }
  const PlateauState& p = state.plateau;
  const json meta = {
      {"format_version", kCheckpointVersion},
      {"model", to_json(cfg.model)},
      {"train_config", to_json(cfg)},
      {"step", state.step},
      {"rng_state", state.rng.state()},
      {"adam",
       {{"beta1", state.opt.adam.beta1},
        {"beta2", state.opt.adam.beta2},
        {"eps", state.opt.adam.eps},
        {"step", state.opt.step}}},
      {"plateau",
       {{"base_lr", p.base_lr},
        {"lr", p.lr},
        {"best", p.best ? json(*p.best) : json(nullptr)},
        {"stale", p.stale},
        {"decays", p.decays},
        {"converged", p.converged}}},
      {"best_auc", state.best_auc},
      {"best_step", state.best_step},
      {"loss_sum", state.loss_sum},
      {"loss_count", state.loss_count},
      {"tensors", tensors}};
  write_file_atomic(tmp / "meta.json", meta.dump(2) + "\n");
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

TrainState load_checkpoint(const fs::path& dir, const TrainConfig& cfg) {
  const json meta = read_meta(dir);
  TrainState s;
  try {
    const auto layout = make_layout(cfg.model);
    load_slots(dir, meta, layout, {0, 1, 2, 3}, s);
    const json& a = meta.at("adam");
    s.opt.adam = {a.at("beta1").get<double>(), a.at("beta2").get<double>(), a.at("eps").get<double>()};
    s.opt.step = a.at("step").get<int64_t>();
    const json& p = meta.at("plateau");
    s.plateau.base_lr = p.at("base_lr").get<double>();
    s.plateau.lr = p.at("lr").get<double>();
    if (!p.at("best").is_null()) s.plateau.best = p.at("best").get<double>();
    s.plateau.stale = p.at("stale").get<int64_t>();
    s.plateau.decays = p.at("decays").get<int64_t>();
    s.plateau.converged = p.at("converged").get<bool>();
    s.step = meta.at("step").get<int64_t>();
    s.rng.set_state(meta.at("rng_state").get<std::string>());
    s.best_auc = meta.at("best_auc").get<double>();
    s.best_step = meta.at("best_step").get<int64_t>();
    s.loss_sum = meta.at("loss_sum").get<double>();
    s.loss_count = meta.at("loss_count").get<int64_t>();
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + dir.string() + ": malformed meta.json: " + e.what());
  }
  return s;
}

TrainConfig checkpoint_config(const fs::path& dir) {
  const json meta = read_meta(dir);
  if (!meta.contains("train_config")) throw IoError("checkpoint " + dir.string() + " lacks train_config");
  return train_config_from_json(meta["train_config"]);
}

ParamSet<float> load_inference_params(const fs::path& dir, TrainConfig* cfg_out) {
  const json meta = read_meta(dir);
  const TrainConfig cfg = checkpoint_config(dir);
  TrainState s;
  try {
    load_slots(dir, meta, make_layout(cfg.model), {3}, s);
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + dir.string() + ": malformed meta.json: " + e.what());
  }
  if (cfg_out) *cfg_out = cfg;
  return s.best_params;
}

}  // namespace lttd
