#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evolmpnn/autograd.hpp"
#include "evolmpnn/embeddings.hpp"
#include "evolmpnn/graph.hpp"
#include "evolmpnn/matrix.hpp"
#include "evolmpnn/residue_encoder.hpp"

namespace evolmpnn {

/// d_ij: mean over positions of R_i minus the positionwise mean of the members' residues (1 x d).
Matrix evolution_diff(const Matrix& r_i, std::span<const std::size_t> members,
                      const ResidueEmbeddings& r);

/// H_j (.) d_ij.
Matrix anchor_message(const Matrix& h_j, const Matrix& d_ij);

/// Anchor sets as lists of row indices, each list ordered by protein id.
using AnchorGroups = std::vector<std::vector<std::size_t>>;

/// Weights of one evolution layer. Only the matrices of the chosen variant are non-empty.
struct EvolutionLayerParams {
  Matrix combine;                  // 2d x d (evolmpnn, evolgnn)
  Matrix neighbor;                 // d x d  (evolgnn)
  Matrix gate;                     // d x d  (evolgnn)
  AttentionLayerParams attention;  // evolformer
  Matrix bias_projection;          // d x d  (evolformer)

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    if (!combine.empty()) f(prefix + "combine", combine);
    if (!neighbor.empty()) f(prefix + "neighbor", neighbor);
    if (!gate.empty()) f(prefix + "gate", gate);
    if (!attention.query.empty()) attention.visit(prefix + "attention.", f);
    if (!bias_projection.empty()) f(prefix + "bias_projection", bias_projection);
  }
};

struct EvolutionLayerVars {
  ad::Var combine, neighbor, gate, bias_projection;
  AttentionLayerVars attention;
};

EvolutionLayerVars bind(ad::Tape& tape, const EvolutionLayerParams& p, EvolutionLayerParams* sink);

/// Rows of the graph's adjacency as a constant sparse operand.
ad::SparseRows adjacency_rows(const Graph& graph);

// Layer maps. `h` holds protein embeddings and `pooled` the position-mean of the final
// residue embeddings, one row per protein.

/// H' = [H, mean_j H_Sj (.) (rbar_i - rbar_Sj)] W.
ad::Var evolmpnn_layer(const ad::Var& h, const ad::Var& pooled, const AnchorGroups& anchors,
                       const EvolutionLayerVars& p);
/// H' = [m_a, m_i] W with m_a = sum_j A_ij (H_j (.) d_ij) W_n and
/// m_i = sigmoid(mean_j A_ij d_ij W_g) (.) H_i.
ad::Var evolgnn_layer(const ad::Var& h, const ad::Var& pooled, const ad::SparseRows& adjacency,
                      const EvolutionLayerVars& p);
/// Protein-level attention layer with logit bias (rbar W_b)(rbar W_b)^T / sqrt(d).
ad::Var evolformer_layer(const ad::Var& h, const ad::Var& pooled, const EvolutionLayerVars& p,
                         std::size_t layer_index);

Matrix evolmpnn_layer(const Matrix& h, const Matrix& pooled, const AnchorGroups& anchors,
                      const EvolutionLayerParams& p);
Matrix evolgnn_layer(const Matrix& h, const Matrix& pooled, const Graph& graph,
                     const EvolutionLayerParams& p);
Matrix evolformer_layer(const Matrix& h, const Matrix& pooled, const EvolutionLayerParams& p);

}  // namespace evolmpnn
