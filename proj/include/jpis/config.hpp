#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "jpis/train.hpp"

namespace jpis {

// Flat JSON object: every TrainConfig field, the model dims, and
// "profile_manifest". Missing keys keep their defaults, unknown keys are
// rejected so typos do not silently fall back to defaults.
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const std::filesystem::path& path, const TrainConfig& c);

}  // namespace jpis
