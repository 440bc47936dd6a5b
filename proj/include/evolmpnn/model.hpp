#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evolmpnn/anchors.hpp"
#include "evolmpnn/embeddings.hpp"
#include "evolmpnn/evolution.hpp"
#include "evolmpnn/family.hpp"
#include "evolmpnn/graph.hpp"
#include "evolmpnn/matrix.hpp"
#include "evolmpnn/residue_encoder.hpp"
#include "evolmpnn/split.hpp"

namespace evolmpnn {

enum class Variant { EvolMPNN, EvolGNN, EvolFormer };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
std::string_view to_string(ResidueMode m);
ResidueMode parse_residue_mode(std::string_view s);
std::string_view to_string(ProteinMode m);
ProteinMode parse_protein_mode(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::EvolMPNN;
  std::size_t d = 128;
  std::size_t heads = 4;
  std::size_t head_dim = 0;  // 0: d / heads
  std::size_t ffn_dim = 0;   // 0: 2d
  std::size_t residue_layers = 2;
  std::size_t evolution_layers = 2;
  std::size_t target_dim = 1;
  AnchorPolicy anchors;
  std::size_t knn_k = 10;
  ResidueMode residue_mode = ResidueMode::OneHot;
  ProteinMode protein_mode = ProteinMode::OneHotMean;

  std::size_t resolved_head_dim() const { return head_dim > 0 ? head_dim : std::max<std::size_t>(1, d / heads); }
  std::size_t resolved_ffn_dim() const { return ffn_dim > 0 ? ffn_dim : 2 * d; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Every learned weight. Projections are empty when the matching embedding comes from a sidecar.
struct ModelParams {
  Matrix residue_projection;  // 20 x d
  Matrix protein_projection;  // 20 x d
  Matrix positional;          // N x d
  std::vector<AttentionLayerParams> residue_layers;
  std::vector<EvolutionLayerParams> evolution_layers;
  Matrix head;  // 2d x theta

  /// Calls f(name, matrix) for every non-empty tensor in a fixed order.
  template <class F>
  void visit(F&& f) {
    if (!residue_projection.empty()) f(std::string("residue_projection"), residue_projection);
    if (!protein_projection.empty()) f(std::string("protein_projection"), protein_projection);
    f(std::string("positional"), positional);
    for (std::size_t l = 0; l < residue_layers.size(); ++l)
      residue_layers[l].visit("residue." + std::to_string(l) + ".", f);
    for (std::size_t l = 0; l < evolution_layers.size(); ++l)
      evolution_layers[l].visit("evolution." + std::to_string(l) + ".", f);
    f(std::string("head"), head);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  std::size_t parameter_count() const;
};

ModelParams init_params(const ModelConfig& config, std::size_t length, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& p);
/// Elementwise a += s * b over matching tensors.
void axpy(ModelParams& a, double s, const ModelParams& b);
bool operator==(const ModelParams& a, const ModelParams& b);

/// Everything besides the weights that a forward pass reads.
struct ModelInputs {
  const Family* family = nullptr;
  const ResidueEmbeddings* residue_sidecar = nullptr;
  const ProteinEmbeddings* protein_sidecar = nullptr;
  std::shared_ptr<const Graph> graph;  // evolgnn only
  std::vector<std::string> anchor_pool;
  std::string fallback_id;
};

/// Inputs whose anchor pool is the split's training ids; builds the K-NN graph for evolgnn.
ModelInputs make_inputs(const Family& family, const SplitAssignment& split, const ModelConfig& config,
                        const ResidueEmbeddings* residue_sidecar = nullptr,
                        const ProteinEmbeddings* protein_sidecar = nullptr);

struct Prediction {
  std::vector<std::size_t> rows;  // family rows, one per output row
  Matrix y;                       // rows x theta
  Matrix z;                       // rows x 2d
  Matrix z_protein;
  Matrix z_residue;
};

/// Anchor index lists per evolution layer, resolved to family rows.
std::vector<AnchorGroups> resolve_anchors(const ModelInputs& inputs, const ModelConfig& config,
                                          std::uint64_t anchor_seed);

/// Predictions for the given family rows. Anchor sets are drawn with `anchor_seed`.
Prediction forward(const ModelInputs& inputs, const ModelParams& params, const ModelConfig& config,
                   std::span<const std::size_t> rows, std::uint64_t anchor_seed);

/// Mean over the listed rows and all target columns of (pred - target)^2.
double mse_loss(const Matrix& pred, const Matrix& target, std::span<const std::size_t> rows);

/// Loss over `rows` (targets indexed by family row) and its gradient, added into `grad`.
double loss_and_grad(const ModelInputs& inputs, const ModelParams& params, const ModelConfig& config,
                     std::span<const std::size_t> rows, const Matrix& targets,
                     std::uint64_t anchor_seed, ModelParams& grad);

struct GradientCheckOptions {
  double eps = 1e-5;
  std::size_t coords_per_tensor = 8;
  std::uint64_t seed = 0;
  double floor = 1e-7;  // denominator floor of the relative error
  std::function<bool(const std::string&)> include;  // tensors to check; all when empty
};

struct TensorCheck {
  std::string name;
  std::size_t coords = 0;
  double max_rel_error = 0.0;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::vector<TensorCheck> tensors;
};

/// Analytic gradient against central differences |a - f| / max(|a|, |f|, floor).
GradientCheckReport gradient_check(const ModelInputs& inputs, const ModelParams& params,
                                   const ModelConfig& config, std::span<const std::size_t> rows,
                                   const Matrix& targets, std::uint64_t anchor_seed,
                                   const GradientCheckOptions& options = {});

/// Family targets as an M x theta matrix.
Matrix target_matrix(const Family& family);

}  // namespace evolmpnn
