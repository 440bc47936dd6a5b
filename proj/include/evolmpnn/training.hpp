#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "evolmpnn/family.hpp"
#include "evolmpnn/model.hpp"
#include "evolmpnn/split.hpp"

namespace evolmpnn {

struct TrainConfig {
  double lr = 5e-4;
  std::size_t epochs = 300;
  std::size_t batch_size = 64;  // 0 trains on the whole training set per step
  std::size_t patience = 30;    // 0 disables early stopping
  std::uint64_t seed = 0;
  bool standardize_targets = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Draw fresh anchor sets for every step instead of reusing the evaluation sets.
  bool resample_anchors_per_step = false;
  // Also score the training set after every epoch.
  bool track_train_spearman = false;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Per-column affine map fitted on the training targets.
struct TargetScaler {
  std::vector<double> mean;
  std::vector<double> std;

  Matrix apply(const Matrix& y) const;
  Matrix invert(const Matrix& y) const;
  friend bool operator==(const TargetScaler&, const TargetScaler&) = default;
};

nlohmann::json to_json(const TargetScaler& s);
TargetScaler target_scaler_from_json(const nlohmann::json& j);

/// Mean and population std of y_train per column (std 0 becomes 1); returns y_all scaled.
std::pair<Matrix, TargetScaler> standardize_targets(const Matrix& y_train, const Matrix& y_all);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> valid_spearman;
  std::optional<double> train_spearman;  // only with track_train_spearman
  double wall_s = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_valid_spearman;
};

/// Equality of everything but wall-clock times.
bool same_outcome(const TrainReport& a, const TrainReport& b);
nlohmann::json to_json(const EpochRecord& r);
void write_train_log(std::ostream& out, const TrainReport& report);

/// Weights plus what is needed to turn predictions back into raw targets.
struct TrainedModel {
  ModelConfig config;
  ModelParams params;
  TargetScaler scaler;
};

/// Anchor seed used for evaluation (and for training unless anchors are resampled per step).
std::uint64_t evaluation_anchor_seed(const ModelConfig& config);

/// Raw-scale predictions (rows x theta) for the given family rows.
Matrix predict(const TrainedModel& model, const ModelInputs& inputs, std::span<const std::size_t> rows);

struct TrainResult {
  TrainedModel model;
  TrainReport report;
};

/// Adam on shuffled mini-batches with early stopping on validation Spearman. Returns the
/// best-validation weights rounded to float32. `log`, when given, receives one JSON line
/// per epoch as it finishes.
TrainResult train(const Family& family, const SplitAssignment& split, const ModelConfig& config,
                  const TrainConfig& train_config, const ResidueEmbeddings* residue_sidecar = nullptr,
                  const ProteinEmbeddings* protein_sidecar = nullptr, std::ostream* log = nullptr);

/// Rounds every weight to the nearest float32.
void round_to_float(ModelParams& params);

}  // namespace evolmpnn
