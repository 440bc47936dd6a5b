#pragma once

#include <filesystem>

#include <json.hpp>

#include "evolmpnn/training.hpp"

namespace evolmpnn {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is a directory holding manifest.json and tensors.bin. The manifest lists
// every tensor (name, shape, dtype, byte offset), the run configuration, the model
// configuration, the sequence length, the target scaler and a CRC-32 of tensors.bin.
// Tensors are little-endian float32 in manifest order.

struct Checkpoint {
  TrainedModel model;
  std::size_t length = 0;
  nlohmann::json run_config;  // as given to save_checkpoint
};

void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model, std::size_t length,
                     const nlohmann::json& run_config = nlohmann::json::object());

/// Throws ValidationError on a version mismatch, checksum mismatch, truncated blob or a
/// tensor whose manifest entry disagrees with the model configuration.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace evolmpnn
