#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "evolmpnn/error.hpp"
#include "evolmpnn/residue_encoder.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace evolmpnn {
namespace {

using testing::random_matrix;

using oracle::Rows;
using oracle::rows_of;

AttentionLayerParams random_layer(std::size_t d, std::size_t heads, std::size_t dh, std::size_t ffn,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AttentionLayerParams p = init_attention_layer(d, heads, dh, ffn, rng);
  p.norm_gain = random_matrix(1, d, rng);
  p.norm_bias = random_matrix(1, d, rng);
  return p;
}

TEST(Attention, SingleResidueAttendsToItself) {
  const AttentionLayerParams p = random_layer(4, 2, 2, 8, 1);
  std::mt19937_64 rng(2);
  for (const Matrix& a : attention_maps(random_matrix(1, 4, rng), p)) EXPECT_EQ(a, Matrix({{1.0}}));
}

TEST(Attention, ZeroQueryIsUniform) {
  AttentionLayerParams p = random_layer(4, 2, 2, 8, 3);
  for (Matrix& q : p.query) q.fill(0.0);
  std::mt19937_64 rng(4);
  for (const Matrix& a : attention_maps(random_matrix(5, 4, rng), p))
    for (double v : a.values()) EXPECT_DOUBLE_EQ(v, 0.2);
  AttentionLayerParams k = random_layer(4, 1, 4, 8, 5);
  k.key[0].fill(0.0);
  const Matrix uniform = attention_maps(random_matrix(3, 4, rng), k)[0];
  for (double v : uniform.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Attention, HandWorkedTwoByTwo) {
  AttentionLayerParams p;
  p.query = {Matrix{{1, 0}, {0, 1}}};
  p.key = {Matrix{{1, 0}, {0, 1}}};
  p.value = {Matrix{{1, 0}, {0, 1}}};
  p.output = {Matrix{{0.5, 0}, {0, 0.5}}};
  p.ffn_in = Matrix(2, 2);
  p.ffn_out = Matrix(2, 2);
  p.norm_gain = Matrix{{1, 1}};
  p.norm_bias = Matrix{{0, 0}};
  const Matrix r{{1, 0}, {0, 2}};
  // logits: [[1,0],[0,4]] / sqrt(2)
  const double a = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
  const double b = 1.0 / (1.0 + std::exp(-4.0 / std::sqrt(2.0)));
  const auto maps = attention_maps(r, p);
  EXPECT_NEAR(maps[0](0, 0), a, 1e-15);
  EXPECT_NEAR(maps[0](1, 1), b, 1e-15);
  // Y = R + 0.5 Att R; with a zero FFN every row of LN(Y) is (+-1) times sqrt(v / (v + eps)).
  const double y00 = 1 + 0.5 * a, y01 = 0.5 * (1 - a) * 2;
  const double y10 = 0.5 * (1 - b), y11 = 2 + 0.5 * b * 2;
  const Matrix out = residue_attention_layer(r, p);
  auto ln = [](double u, double v) {
    const double half = (u - v) / 2;
    return half / std::sqrt(half * half + 1e-5);
  };
  EXPECT_NEAR(out(0, 0), ln(y00, y01), 1e-12);
  EXPECT_NEAR(out(0, 1), -ln(y00, y01), 1e-12);
  EXPECT_NEAR(out(1, 0), ln(y10, y11), 1e-12);
  EXPECT_NEAR(out(1, 1), -ln(y10, y11), 1e-12);
}

TEST(Attention, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AttentionLayerParams p = random_layer(6, 3, 2, 10, seed);
    std::mt19937_64 rng(seed + 100);
    const Matrix r = random_matrix(7, 6, rng);
    const Rows expect = oracle::attention(rows_of(r), p);
    const Matrix got = residue_attention_layer(r, p);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(got(i, c), expect[i][c], 1e-12);
  }
}

TEST(Attention, RowsAreProbabilityVectors) {
  const AttentionLayerParams p = random_layer(8, 4, 2, 16, 7);
  std::mt19937_64 rng(8);
  for (const Matrix& a : attention_maps(random_matrix(12, 8, rng, 3.0), p))
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (double v : a.row(i)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Attention, LayerNormStatistics) {
  AttentionLayerParams p = random_layer(8, 2, 4, 16, 9);
  p.norm_gain.fill(1.0);
  p.norm_bias.fill(0.0);
  std::mt19937_64 rng(10);
  const Matrix out = residue_attention_layer(random_matrix(6, 8, rng, 3.0), p);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (double v : out.row(i)) mean += v / 8.0;
    for (double v : out.row(i)) var += (v - mean) * (v - mean) / 8.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Attention, ResidualPathOnly) {
  AttentionLayerParams p = random_layer(4, 2, 2, 8, 11);
  for (Matrix& v : p.value) v.fill(0.0);
  p.ffn_out.fill(0.0);
  p.norm_gain.fill(1.0);
  p.norm_bias.fill(0.0);
  std::mt19937_64 rng(12);
  const Matrix r = random_matrix(3, 4, rng);
  const Matrix out = residue_attention_layer(r, p);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0, var = 0.0;
    for (double v : r.row(i)) mean += v / 4.0;
    for (double v : r.row(i)) var += (v - mean) * (v - mean) / 4.0;
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(i, c), (r(i, c) - mean) / std::sqrt(var + 1e-5), 1e-12);
  }
}

TEST(Attention, NonFiniteLogitsNameLayerAndHead) {
  AttentionLayerParams p = random_layer(4, 2, 2, 8, 13);
  p.query[1](0, 0) = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(14);
  try {
    residue_attention_layer(random_matrix(3, 4, rng), p, 3);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3 head 1"), std::string::npos) << e.what();
  }
}

TEST(EncodeResidues, PerProteinIndependence) {
  const std::vector<AttentionLayerParams> layers{random_layer(4, 2, 2, 8, 15), random_layer(4, 2, 2, 8, 16)};
  std::mt19937_64 rng(17);
  ResidueEmbeddings x(4, 5, 4);
  for (std::size_t i = 0; i < 4; ++i) x.set_protein(i, random_matrix(5, 4, rng));
  x.set_protein(3, x.protein(1));
  const ResidueEmbeddings r = encode_residues(x, layers);
  EXPECT_EQ(r.protein(1), r.protein(3));

  ResidueEmbeddings swapped = x;
  swapped.set_protein(0, x.protein(2));
  swapped.set_protein(2, x.protein(0));
  const ResidueEmbeddings rs = encode_residues(swapped, layers);
  EXPECT_EQ(rs.protein(0), r.protein(2));
  EXPECT_EQ(rs.protein(2), r.protein(0));
  EXPECT_EQ(r.protein(0), residue_attention_layer(residue_attention_layer(x.protein(0), layers[0], 0), layers[1], 1));
}

}  // namespace
}  // namespace evolmpnn
