#include "evolmpnn/evolution.hpp"

#include <cmath>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

Matrix evolution_diff(const Matrix& r_i, std::span<const std::size_t> members,
                      const ResidueEmbeddings& r) {
  if (members.empty()) throw ValidationError("anchor set is empty");
  if (r_i.rows() != r.length || r_i.cols() != r.dim)
    throw ValidationError("residue block shape does not match the anchor residues");
  Matrix anchor(r.length, r.dim);
  for (std::size_t m : members) anchor += r.protein(m);
  anchor *= 1.0 / static_cast<double>(members.size());
  return column_mean(r_i - anchor);
}

Matrix anchor_message(const Matrix& h_j, const Matrix& d_ij) {
  if (!h_j.same_shape(d_ij)) throw ValidationError("anchor message operands differ in shape");
  return hadamard(h_j, d_ij);
}

EvolutionLayerVars bind(ad::Tape& tape, const EvolutionLayerParams& p, EvolutionLayerParams* sink) {
  EvolutionLayerVars v;
  auto leaf = [&](const Matrix& m, Matrix* s) { return m.empty() ? ad::Var() : tape.parameter(m, s); };
  v.combine = leaf(p.combine, sink ? &sink->combine : nullptr);
  v.neighbor = leaf(p.neighbor, sink ? &sink->neighbor : nullptr);
  v.gate = leaf(p.gate, sink ? &sink->gate : nullptr);
  v.bias_projection = leaf(p.bias_projection, sink ? &sink->bias_projection : nullptr);
  if (!p.attention.query.empty()) v.attention = bind(tape, p.attention, sink ? &sink->attention : nullptr);
  return v;
}

ad::SparseRows adjacency_rows(const Graph& graph) {
  ad::SparseRows s;
  s.cols = graph.nodes();
  s.rows = graph.adjacency;
  return s;
}

namespace {

void require(const ad::Var& v, const char* what) {
  if (!v.valid()) throw ValidationError(std::string("evolution layer is missing its ") + what + " weights");
}

void check_inputs(const ad::Var& h, const ad::Var& pooled) {
  if (!h.value().same_shape(pooled.value()))
    throw ValidationError("protein and pooled residue embeddings differ in shape");
}

}  // namespace

ad::Var evolmpnn_layer(const ad::Var& h, const ad::Var& pooled, const AnchorGroups& anchors,
                       const EvolutionLayerVars& p) {
  require(p.combine, "combine");
  check_inputs(h, pooled);
  if (anchors.empty()) throw ValidationError("evolmpnn layer needs at least one anchor set");
  for (const auto& g : anchors)
    if (g.empty()) throw ValidationError("anchor set is empty");
  const ad::Var h_s = ad::group_mean(h, anchors);
  const ad::Var r_s = ad::group_mean(pooled, anchors);
  const ad::Var h_bar = ad::mean_rows(h_s);
  const ad::Var hr_bar = ad::mean_rows(ad::mul(h_s, r_s));
  const ad::Var messages = ad::sub_row(ad::mul_row(pooled, h_bar), hr_bar);
  return ad::matmul(ad::concat_cols(h, messages), p.combine);
}

ad::Var evolgnn_layer(const ad::Var& h, const ad::Var& pooled, const ad::SparseRows& adjacency,
                      const EvolutionLayerVars& p) {
  require(p.combine, "combine");
  require(p.neighbor, "neighbor");
  require(p.gate, "gate");
  check_inputs(h, pooled);
  if (adjacency.rows.size() != h.rows() || adjacency.cols != h.rows())
    throw ValidationError("graph size does not match the number of proteins");

  const std::size_t n = h.rows();
  std::vector<double> self_weight(n), inv_degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = adjacency.rows[i];
    if (row.empty()) continue;
    double total = 0.0;
    for (const auto& e : row) total += e.second;
    inv_degree[i] = 1.0 / static_cast<double>(row.size());
    self_weight[i] = total * inv_degree[i];
  }

  const ad::Var ah = ad::sparse_matmul(adjacency, h);
  const ad::Var ahr = ad::sparse_matmul(adjacency, ad::mul(h, pooled));
  const ad::Var aggregated = ad::matmul(ad::sub(ad::mul(pooled, ah), ahr), p.neighbor);

  const ad::Var mean_diff = ad::sub(ad::scale_rows(pooled, self_weight),
                                    ad::scale_rows(ad::sparse_matmul(adjacency, pooled), inv_degree));
  const ad::Var gated = ad::mul(ad::sigmoid(ad::matmul(mean_diff, p.gate)), h);
  return ad::matmul(ad::concat_cols(aggregated, gated), p.combine);
}

ad::Var evolformer_layer(const ad::Var& h, const ad::Var& pooled, const EvolutionLayerVars& p,
                         std::size_t layer_index) {
  require(p.bias_projection, "bias projection");
  check_inputs(h, pooled);
  const ad::Var b = ad::matmul(pooled, p.bias_projection);
  const ad::Var bias = ad::scale(ad::matmul_nt(b, b), 1.0 / std::sqrt(static_cast<double>(h.cols())));
  return attention_layer(h, p.attention, layer_index, &bias);
}

Matrix evolmpnn_layer(const Matrix& h, const Matrix& pooled, const AnchorGroups& anchors,
                      const EvolutionLayerParams& p) {
  ad::Tape t;
  return evolmpnn_layer(t.constant(h), t.constant(pooled), anchors, bind(t, p, nullptr)).value();
}

Matrix evolgnn_layer(const Matrix& h, const Matrix& pooled, const Graph& graph,
                     const EvolutionLayerParams& p) {
  ad::Tape t;
  return evolgnn_layer(t.constant(h), t.constant(pooled), adjacency_rows(graph), bind(t, p, nullptr))
      .value();
}

Matrix evolformer_layer(const Matrix& h, const Matrix& pooled, const EvolutionLayerParams& p) {
  ad::Tape t;
  return evolformer_layer(t.constant(h), t.constant(pooled), bind(t, p, nullptr), 0).value();
}

}  // namespace evolmpnn
