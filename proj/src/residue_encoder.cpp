#include "evolmpnn/residue_encoder.hpp"

#include <cmath>
#include <string>

#include "evolmpnn/error.hpp"
#include "evolmpnn/parallel.hpp"

namespace evolmpnn {

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(rows + cols)));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

Matrix zeros(const Matrix& m) { return Matrix(m.rows(), m.cols()); }

ad::Var leaf(ad::Tape& t, const Matrix& v, Matrix* sink) { return t.parameter(v, sink); }

void require_finite(const Matrix& m, std::size_t layer, std::size_t head) {
  if (!all_finite(m))
    throw NumericError("non-finite attention logits in layer " + std::to_string(layer) + " head " +
                       std::to_string(head));
}

}  // namespace

AttentionLayerParams init_attention_layer(std::size_t d, std::size_t heads, std::size_t head_dim,
                                          std::size_t ffn_dim, std::mt19937_64& rng) {
  AttentionLayerParams p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.push_back(glorot(d, head_dim, rng));
    p.key.push_back(glorot(d, head_dim, rng));
    p.value.push_back(glorot(d, head_dim, rng));
    p.output.push_back(glorot(head_dim, d, rng));
  }
  p.ffn_in = glorot(d, ffn_dim, rng);
  p.ffn_out = glorot(ffn_dim, d, rng);
  p.norm_gain = Matrix(1, d, 1.0);
  p.norm_bias = Matrix(1, d);
  return p;
}

AttentionLayerParams zeros_like(const AttentionLayerParams& p) {
  AttentionLayerParams z;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    z.query.push_back(zeros(p.query[h]));
    z.key.push_back(zeros(p.key[h]));
    z.value.push_back(zeros(p.value[h]));
    z.output.push_back(zeros(p.output[h]));
  }
  z.ffn_in = zeros(p.ffn_in);
  z.ffn_out = zeros(p.ffn_out);
  z.norm_gain = zeros(p.norm_gain);
  z.norm_bias = zeros(p.norm_bias);
  return z;
}

AttentionLayerVars bind(ad::Tape& tape, const AttentionLayerParams& p, AttentionLayerParams* sink) {
  AttentionLayerVars v;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    v.query.push_back(leaf(tape, p.query[h], sink ? &sink->query[h] : nullptr));
    v.key.push_back(leaf(tape, p.key[h], sink ? &sink->key[h] : nullptr));
    v.value.push_back(leaf(tape, p.value[h], sink ? &sink->value[h] : nullptr));
    v.output.push_back(leaf(tape, p.output[h], sink ? &sink->output[h] : nullptr));
  }
  v.ffn_in = leaf(tape, p.ffn_in, sink ? &sink->ffn_in : nullptr);
  v.ffn_out = leaf(tape, p.ffn_out, sink ? &sink->ffn_out : nullptr);
  v.norm_gain = leaf(tape, p.norm_gain, sink ? &sink->norm_gain : nullptr);
  v.norm_bias = leaf(tape, p.norm_bias, sink ? &sink->norm_bias : nullptr);
  return v;
}

namespace {

ad::Var head_attention(const ad::Var& x, const AttentionLayerVars& p, std::size_t h,
                       std::size_t layer_index, const ad::Var* logit_bias) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  ad::Var logits = ad::scale(ad::matmul_nt(ad::matmul(x, p.query[h]), ad::matmul(x, p.key[h])), inv);
  if (logit_bias != nullptr) logits = ad::add(logits, *logit_bias);
  require_finite(logits.value(), layer_index, h);
  return ad::softmax_rows(logits);
}

}  // namespace

ad::Var attention_layer(const ad::Var& x, const AttentionLayerVars& p, std::size_t layer_index,
                        const ad::Var* logit_bias) {
  if (p.query.empty()) throw ValidationError("attention layer needs at least one head");
  if (x.cols() != p.ffn_in.rows()) throw ValidationError("attention layer input width mismatch");
  ad::Var y = x;
  for (std::size_t h = 0; h < p.query.size(); ++h) {
    const ad::Var att = head_attention(x, p, h, layer_index, logit_bias);
    const ad::Var msg = ad::matmul(ad::matmul(ad::matmul(att, x), p.value[h]), p.output[h]);
    y = ad::add(y, msg);
  }
  const ad::Var ffn = ad::matmul(ad::elu(ad::matmul(y, p.ffn_in)), p.ffn_out);
  const ad::Var out = ad::layer_norm(ad::add(y, ffn), p.norm_gain, p.norm_bias);
  if (!all_finite(out.value()))
    throw NumericError("non-finite output of attention layer " + std::to_string(layer_index));
  return out;
}

Matrix residue_attention_layer(const Matrix& r, const AttentionLayerParams& p,
                               std::size_t layer_index) {
  ad::Tape t;
  const AttentionLayerVars v = bind(t, p, nullptr);
  return attention_layer(t.constant(r), v, layer_index).value();
}

std::vector<Matrix> attention_maps(const Matrix& r, const AttentionLayerParams& p,
                                   const Matrix* logit_bias) {
  ad::Tape t;
  const AttentionLayerVars v = bind(t, p, nullptr);
  const ad::Var x = t.constant(r);
  ad::Var bias;
  if (logit_bias != nullptr) bias = t.constant(*logit_bias);
  std::vector<Matrix> maps;
  for (std::size_t h = 0; h < p.heads(); ++h)
    maps.push_back(head_attention(x, v, h, 0, logit_bias ? &bias : nullptr).value());
  return maps;
}

ResidueEmbeddings encode_residues(const ResidueEmbeddings& x,
                                  const std::vector<AttentionLayerParams>& layers) {
  if (layers.empty()) throw ValidationError("residue encoder needs at least one layer");
  ResidueEmbeddings out = x;
  parallel_for(x.proteins, [&](std::size_t i) {
    Matrix r = x.protein(i);
    for (std::size_t l = 0; l < layers.size(); ++l) r = residue_attention_layer(r, layers[l], l);
    out.set_protein(i, r);
  });
  return out;
}

}  // namespace evolmpnn
