#pragma once

#include <json.hpp>

#include "lttd/synthdata.hpp"
#include "lttd/train.hpp"

namespace lttd {

// Strict readers: every key must be known (ParameterError naming the full
// field path otherwise) and every value must have the right type. Missing keys
// keep their defaults. A model may be a preset name ("paper", "desk", "toy")
// or an object with an optional "preset" base plus overrides.
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const SynthConfig& cfg);

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");
TrainConfig train_config_from_json(const nlohmann::json& j);
SynthConfig synth_config_from_json(const nlohmann::json& j);

// Reads and parses a JSON file; IoError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace lttd
