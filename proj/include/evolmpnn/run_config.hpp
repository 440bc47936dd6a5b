#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "evolmpnn/model.hpp"
#include "evolmpnn/training.hpp"

namespace evolmpnn {

struct DataConfig {
  std::filesystem::path family;
  std::filesystem::path split;
  std::optional<std::filesystem::path> protein_sidecar;
  std::optional<std::filesystem::path> residue_sidecar;
  std::optional<std::size_t> knn_k;  // overrides model.knn_k
};

/// JSON document {"model": {...}, "train": {...}, "data": {...}}. Unknown keys are rejected
/// at every level; relative paths resolve against the config file's directory.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
/// Paths are written as absolute paths.
nlohmann::json to_json(const RunConfig& c);

}  // namespace evolmpnn
