#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evolmpnn/family.hpp"
#include "evolmpnn/graph.hpp"
#include "evolmpnn/matrix.hpp"
#include "evolmpnn/split.hpp"
#include "evolmpnn/training.hpp"

namespace evolmpnn {

/// 1-based ranks, ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation of average ranks. Throws ValidationError on length mismatch,
/// fewer than 2 values, or a constant input.
double spearman(std::span<const double> a, std::span<const double> b);
/// As spearman, but nullopt where it is undefined.
std::optional<double> try_spearman(std::span<const double> a, std::span<const double> b);

struct GroupMetrics {
  std::string name;
  std::size_t n = 0;
  std::optional<double> rho;
};

struct Metrics {
  std::optional<double> spearman;
  double mse = 0.0;
  std::vector<GroupMetrics> by_mutation_count;
  double runtime_s = 0.0;
};

nlohmann::json to_json(const Metrics& m);

/// Ascending lower edges of the mutation-count groups; the last group is open-ended.
inline const std::vector<std::size_t> kDefaultGroupEdges{1, 3, 5, 8};

/// "1-2", "3-4", "5-7", "8+" for the default edges.
std::string group_name(const std::vector<std::size_t>& edges, std::size_t g);
std::vector<std::size_t> parse_group_edges(const std::string& text);

/// Group index of a mutation count, or nullopt below the first edge.
std::optional<std::size_t> mutation_group(const std::vector<std::size_t>& edges, std::size_t count);

/// Per-group Spearman over the first target column.
std::vector<GroupMetrics> grouped_spearman(std::span<const double> pred, std::span<const double> target,
                                           std::span<const std::size_t> mutation_counts,
                                           const std::vector<std::size_t>& edges);

/// Spearman (mean over target columns) and MSE of raw-scale predictions.
Metrics score(const Matrix& pred, const Matrix& target);

/// Predicts the proteins tagged `tag` and scores them on the raw target scale. The anchor
/// pool is the split's training set.
Metrics evaluate(const TrainedModel& model, const Family& family, const SplitAssignment& split,
                 SplitTag tag, const std::vector<std::size_t>& group_edges = kDefaultGroupEdges,
                 const ResidueEmbeddings* residue_sidecar = nullptr,
                 const ProteinEmbeddings* protein_sidecar = nullptr);

/// by_mutation_count part of evaluate on its own.
std::vector<GroupMetrics> eval_by_mutation_count(const TrainedModel& model, const Family& family,
                                                 const SplitAssignment& split,
                                                 const std::vector<std::size_t>& group_edges,
                                                 const ResidueEmbeddings* residue_sidecar = nullptr,
                                                 const ProteinEmbeddings* protein_sidecar = nullptr);

struct DistortionReport {
  double alpha = 1.0;  // infinity when an embedded distance collapses to zero
  std::size_t pairs = 0;
  std::string metric;
};

nlohmann::json to_json(const DistortionReport& r);

/// Scale-optimal distortion (max expansion x max contraction) of the rows of `embedded`
/// under the L_p distance against `base`, over pairs with nonzero base distance.
DistortionReport distortion(const Matrix& embedded, const DistanceFn& base, double p = 2.0,
                            const std::string& metric = "custom");
DistortionReport distortion(const Matrix& embedded, const Family& family, double p = 2.0);

/// Landmark embedding f_j(x) = min over s in S_j of base(x, s) / k, with S_j drawn by the
/// anchor inclusion rule over all n points (k = 0 picks ceil(log2 n)^2).
Matrix reference_embedder(std::size_t n, const DistanceFn& base, std::size_t k, std::uint64_t seed);

/// Closed-form ridge regression (lambda 1e-3, centred) on flattened one-hot sequences,
/// fitted on train + valid and scored on `tag`.
Metrics linear_baseline(const Family& family, const SplitAssignment& split, SplitTag tag = SplitTag::Test,
                        const std::vector<std::size_t>& group_edges = kDefaultGroupEdges,
                        double lambda = 1e-3);

}  // namespace evolmpnn
