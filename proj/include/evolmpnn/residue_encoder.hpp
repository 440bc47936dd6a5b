#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "evolmpnn/autograd.hpp"
#include "evolmpnn/embeddings.hpp"
#include "evolmpnn/matrix.hpp"

namespace evolmpnn {

/// One multi-head self-attention layer with a two-matrix ELU feed-forward block and a
/// trailing LayerNorm. No bias terms.
struct AttentionLayerParams {
  std::vector<Matrix> query;   // per head, d x d_H
  std::vector<Matrix> key;     // per head, d x d_H
  std::vector<Matrix> value;   // per head, d x d_H
  std::vector<Matrix> output;  // per head, d_H x d
  Matrix ffn_in;               // d x d_t
  Matrix ffn_out;              // d_t x d
  Matrix norm_gain;            // 1 x d
  Matrix norm_bias;            // 1 x d

  std::size_t heads() const { return query.size(); }
  std::size_t dim() const { return ffn_in.rows(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t h = 0; h < query.size(); ++h) {
      const std::string p = prefix + "head" + std::to_string(h) + ".";
      f(p + "query", query[h]);
      f(p + "key", key[h]);
      f(p + "value", value[h]);
      f(p + "output", output[h]);
    }
    f(prefix + "ffn_in", ffn_in);
    f(prefix + "ffn_out", ffn_out);
    f(prefix + "norm_gain", norm_gain);
    f(prefix + "norm_bias", norm_bias);
  }
};

/// Glorot-normal projections, unit gain, zero bias.
AttentionLayerParams init_attention_layer(std::size_t d, std::size_t heads, std::size_t head_dim,
                                          std::size_t ffn_dim, std::mt19937_64& rng);
AttentionLayerParams zeros_like(const AttentionLayerParams& p);

/// Tape leaves for a layer; gradients go to `sink` when it is non-null.
struct AttentionLayerVars {
  std::vector<ad::Var> query, key, value, output;
  ad::Var ffn_in, ffn_out, norm_gain, norm_bias;
};

AttentionLayerVars bind(ad::Tape& tape, const AttentionLayerParams& p, AttentionLayerParams* sink);

/// out = LN(Y + ELU(Y W1) W2), Y = X + sum_h softmax(X Wq (X Wk)^T / sqrt(d) + bias) X Wv Wo.
/// `logit_bias` (rows x rows) is optional. Non-finite logits raise NumericError naming
/// `layer_index` and the head.
ad::Var attention_layer(const ad::Var& x, const AttentionLayerVars& p, std::size_t layer_index,
                        const ad::Var* logit_bias = nullptr);

Matrix residue_attention_layer(const Matrix& r, const AttentionLayerParams& p,
                               std::size_t layer_index = 0);
/// Per-head attention matrices of the layer applied to r.
std::vector<Matrix> attention_maps(const Matrix& r, const AttentionLayerParams& p,
                                   const Matrix* logit_bias = nullptr);

/// Applies the layer stack to every protein independently.
ResidueEmbeddings encode_residues(const ResidueEmbeddings& x,
                                  const std::vector<AttentionLayerParams>& layers);

}  // namespace evolmpnn
