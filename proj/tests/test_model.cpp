#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evolmpnn/error.hpp"
#include "evolmpnn/model.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace evolmpnn {
namespace {

using testing::family_from_csv;
using testing::small_family;

SplitAssignment all_train_but(const Family& f, std::vector<std::size_t> test_rows) {
  SplitAssignment s;
  s.tags.assign(f.size(), SplitTag::Train);
  for (std::size_t r : test_rows) s.tags[r] = SplitTag::Test;
  return s;
}

ModelConfig tiny_config(Variant v, std::size_t d = 8) {
  ModelConfig c;
  c.variant = v;
  c.d = d;
  c.heads = 2;
  c.residue_layers = 1;
  c.evolution_layers = 1;
  c.knn_k = 2;
  c.anchors.seed = 5;
  return c;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

constexpr Variant kVariants[] = {Variant::EvolMPNN, Variant::EvolGNN, Variant::EvolFormer};

TEST(ModelConfig, JsonRoundTripAndUnknownKeys) {
  ModelConfig c = tiny_config(Variant::EvolFormer);
  c.anchors.resample = false;
  c.ffn_dim = 12;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  nlohmann::json j = to_json(c);
  j["depth"] = 3;
  EXPECT_THROW(model_config_from_json(j), ValidationError);
  j = to_json(c);
  j["anchors"]["bogus"] = 1;
  EXPECT_THROW(model_config_from_json(j), ValidationError);
  c.d = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(parse_variant("gat"), ValidationError);
}

TEST(ModelParams, TensorNamesAndCount) {
  const ModelConfig c = tiny_config(Variant::EvolMPNN);
  const ModelParams p = init_params(c, 4, 1);
  std::vector<std::string> names;
  std::size_t total = 0;
  p.visit([&](const std::string& n, const Matrix& m) {
    names.push_back(n);
    total += m.size();
  });
  EXPECT_EQ(names.front(), "residue_projection");
  EXPECT_EQ(names.back(), "head");
  EXPECT_NE(std::find(names.begin(), names.end(), "residue.0.head1.query"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "evolution.0.combine"), names.end());
  EXPECT_EQ(total, p.parameter_count());
  EXPECT_EQ(p.head.rows(), 16u);
  EXPECT_EQ(init_params(c, 4, 1), p);
  EXPECT_FALSE(init_params(c, 4, 2) == p);
}

TEST(Forward, ShapesForEveryVariant) {
  std::vector<ProteinRecord> records = small_family(10, 5, 3, 1).records();
  for (auto& r : records) r.target = {r.target[0], 2 * r.target[0], -1.0};
  const Family f(records);
  for (Variant v : kVariants) {
    ModelConfig c = tiny_config(v);
    c.target_dim = 3;
    const ModelInputs in = make_inputs(f, all_train_but(f, {7, 8, 9}), c);
    const Prediction p = forward(in, init_params(c, 5, 2), c, iota_rows(10), 0);
    EXPECT_EQ(p.y.rows(), 10u);
    EXPECT_EQ(p.y.cols(), 3u);
    EXPECT_EQ(p.z.rows(), 10u);
    EXPECT_EQ(p.z.cols(), 16u);
    EXPECT_EQ(p.z_protein.cols(), 8u);
    EXPECT_EQ(p.z_residue.cols(), 8u);
    EXPECT_TRUE(all_finite(p.y));
  }
}

TEST(Forward, ZeroHeadPredictsZero) {
  const Family f = small_family(8, 5, 3, 2);
  for (Variant v : kVariants) {
    const ModelConfig c = tiny_config(v);
    ModelParams p = init_params(c, 5, 3);
    p.head.fill(0.0);
    const Prediction out = forward(make_inputs(f, all_train_but(f, {}), c), p, c, iota_rows(8), 0);
    for (double y : out.y.values()) EXPECT_EQ(y, 0.0);
  }
}

TEST(Forward, DuplicateSequencesGetEqualRows) {
  const Family f = family_from_csv(
      "wt,ACDEF,0,1\na,ACDEG,1,0\nb,AKDEF,2,0\ndup_a,ACDEG,3,0\nc,WCDEF,4,0\nd,ACDYF,5,0\n");
  for (Variant v : {Variant::EvolMPNN, Variant::EvolFormer}) {
    const ModelConfig c = tiny_config(v);
    const Prediction out =
        forward(make_inputs(f, all_train_but(f, {5}), c), init_params(c, 5, 4), c, iota_rows(6), 1);
    EXPECT_EQ(row_slice(out.y, 1, 1), row_slice(out.y, 3, 1)) << to_string(v);
    EXPECT_EQ(row_slice(out.z, 1, 1), row_slice(out.z, 3, 1)) << to_string(v);
  }
}

TEST(Forward, SubsetEqualsFullEvaluation) {
  const Family f = small_family(30, 6, 3, 5);
  const ModelConfig c = tiny_config(Variant::EvolMPNN);
  const ModelInputs in = make_inputs(f, all_train_but(f, {20, 21, 22, 23}), c);
  const ModelParams p = init_params(c, 6, 6);
  const Prediction full = forward(in, p, c, iota_rows(30), 2);
  const std::vector<std::size_t> some{22, 3, 17};
  const Prediction part = forward(in, p, c, some, 2);
  for (std::size_t k = 0; k < some.size(); ++k) EXPECT_EQ(row_slice(part.y, k, 1), row_slice(full.y, some[k], 1));
  EXPECT_EQ(forward(in, p, c, some, 2).y, part.y);
}

TEST(Forward, PermutationEquivariance) {
  const Family f = small_family(16, 6, 3, 7);
  std::vector<std::size_t> order = iota_rows(16);
  std::mt19937_64 rng(8);
  std::shuffle(order.begin(), order.end(), rng);
  const Family g = permuted(f, order);
  const SplitAssignment sf = all_train_but(f, {1, 4, 9});
  SplitAssignment sg;
  for (std::size_t i = 0; i < 16; ++i) sg.tags.push_back(sf.tags[order[i]]);
  for (Variant v : {Variant::EvolMPNN, Variant::EvolFormer}) {
    const ModelConfig c = tiny_config(v);
    const ModelParams p = init_params(c, 6, 9);
    const Matrix a = forward(make_inputs(f, sf, c), p, c, iota_rows(16), 3).y;
    const Matrix b = forward(make_inputs(g, sg, c), p, c, iota_rows(16), 3).y;
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(b(i, 0), a(order[i], 0), 1e-12) << to_string(v);
  }
}

TEST(Forward, RepeatedCallsAreBitwiseEqual) {
  const Family f = small_family(12, 5, 3, 10);
  for (Variant v : kVariants) {
    ModelConfig c = tiny_config(v);
    c.anchors.resample = false;
    const ModelInputs in = make_inputs(f, all_train_but(f, {2}), c);
    const ModelParams p = init_params(c, 5, 11);
    EXPECT_EQ(forward(in, p, c, iota_rows(12), 4).y, forward(in, p, c, iota_rows(12), 4).y);
  }
}

// Hand-set weights: a fixed smooth function of the tensor name and position.
ModelParams hand_params(const ModelConfig& c, std::size_t length) {
  ModelParams p = init_params(c, length, 0);
  std::size_t t = 0;
  p.visit([&](const std::string&, Matrix& m) {
    ++t;
    for (std::size_t k = 0; k < m.size(); ++k)
      m.values()[k] = 0.6 * std::sin(0.7 * static_cast<double>(k) + 1.3 * static_cast<double>(t));
  });
  return p;
}

TEST(Forward, MatchesStraightLineRecomputation) {
  const Family f = family_from_csv("wt,ACD,0.5,1\nm1,ACE,1.0,0\nm2,KCD,-0.5,0\nm3,KWE,2.0,0\n");
  ModelConfig c = tiny_config(Variant::EvolMPNN, 4);
  c.anchors.seed = 3;
  const SplitAssignment split = all_train_but(f, {3});
  const ModelInputs in = make_inputs(f, split, c);
  const ModelParams p = hand_params(c, 3);
  const std::size_t d = 4;

  oracle::Rows pooled(4, std::vector<double>(d, 0.0)), h(4, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < 4; ++i) {
    oracle::Rows x(3, std::vector<double>(d));
    for (std::size_t pos = 0; pos < 3; ++pos) {
      const auto a = static_cast<std::size_t>(residue_index(f.record(i).sequence[pos]));
      for (std::size_t k = 0; k < d; ++k) {
        x[pos][k] = p.residue_projection(a, k) * p.positional(pos, k);
        h[i][k] += p.protein_projection(a, k) / 3.0;
      }
    }
    const oracle::Rows r = oracle::attention(x, p.residue_layers[0]);
    for (std::size_t pos = 0; pos < 3; ++pos)
      for (std::size_t k = 0; k < d; ++k) pooled[i][k] += r[pos][k] / 3.0;
  }
  const AnchorGroups groups = resolve_anchors(in, c, 3)[0];
  const Matrix& w = p.evolution_layers[0].combine;
  std::vector<double> expected(4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> hhat(d, 0.0);
    for (std::size_t k = 0; k < d; ++k)
      for (const auto& s : groups) {
        double hs = 0.0, rs = 0.0;
        for (std::size_t m : s) {
          hs += h[m][k] / static_cast<double>(s.size());
          rs += pooled[m][k] / static_cast<double>(s.size());
        }
        hhat[k] += hs * (pooled[i][k] - rs) / static_cast<double>(groups.size());
      }
    for (std::size_t o = 0; o < d; ++o) {
      double h_next = 0.0;
      for (std::size_t k = 0; k < d; ++k) h_next += h[i][k] * w(k, o) + hhat[k] * w(d + k, o);
      expected[i] += h_next * p.head(o, 0) + pooled[i][o] * p.head(d + o, 0);
    }
  }

  const Prediction got = forward(in, p, c, iota_rows(4), 3);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got.y(i, 0), expected[i], 1e-12);

  // Frozen values of the same computation.
  const double fixture[] = {0.70192433219894534, 0.94450684261072149, 0.27084625209283769,
                           0.30831358442818202};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got.y(i, 0), fixture[i], 1e-9);
}

TEST(MseLoss, Examples) {
  const Matrix y{{1}, {2}, {3}};
  const auto all = iota_rows(3);
  EXPECT_EQ(mse_loss(y, y, all), 0.0);
  EXPECT_EQ(mse_loss(y + Matrix(3, 1, 1.0), y, all), 1.0);
  EXPECT_EQ(mse_loss(Matrix{{0}, {2}}, Matrix{{1}, {0}}, iota_rows(2)), 2.5);
  EXPECT_EQ(mse_loss(Matrix{{0}, {2}, {9}}, Matrix{{1}, {0}, {0}}, std::vector<std::size_t>{1, 0}), 2.5);
  EXPECT_THROW(mse_loss(y, y, std::vector<std::size_t>{}), ValidationError);
  EXPECT_THROW(mse_loss(y, Matrix(2, 1), all), ValidationError);
}

TEST(MseLoss, RowOrderDoesNotMatter) {
  std::mt19937_64 rng(12);
  const Matrix a = testing::random_matrix(20, 2, rng), b = testing::random_matrix(20, 2, rng);
  std::vector<std::size_t> rows{3, 7, 1, 19, 12, 5};
  const double base = mse_loss(a, b, rows);
  std::reverse(rows.begin(), rows.end());
  EXPECT_NEAR(mse_loss(a, b, rows), base, 1e-15);
}

struct CheckSetup {
  Family family;
  SplitAssignment split;
  ModelConfig config;
  ModelInputs inputs;
  ModelParams params;
  Matrix targets;
  std::vector<std::size_t> rows;
};

CheckSetup check_setup(Variant v) {
  CheckSetup s{small_family(6, 4, 3, 21), {}, tiny_config(v), {}, {}, {}, {}};
  s.split = all_train_but(s.family, {5});
  s.inputs = make_inputs(s.family, s.split, s.config);
  s.params = init_params(s.config, 4, 22);
  s.targets = target_matrix(s.family);
  s.rows = s.split.rows(SplitTag::Train);
  return s;
}

TEST(GradientCheck, AllVariantsWithinTolerance) {
  for (Variant v : kVariants) {
    const CheckSetup s = check_setup(v);
    const GradientCheckReport r = gradient_check(s.inputs, s.params, s.config, s.rows, s.targets, 7);
    EXPECT_LE(r.max_rel_error, 1e-4) << to_string(v);
    std::vector<std::size_t> sizes;
    s.params.visit([&](const std::string&, const Matrix& m) { sizes.push_back(m.size()); });
    ASSERT_EQ(r.tensors.size(), sizes.size());
    for (std::size_t t = 0; t < sizes.size(); ++t)
      EXPECT_EQ(r.tensors[t].coords, std::min<std::size_t>(8, sizes[t])) << r.tensors[t].name;
  }
}

TEST(GradientCheck, LinearHeadIsExact) {
  const CheckSetup s = check_setup(Variant::EvolMPNN);
  GradientCheckOptions o;
  o.include = [](const std::string& name) { return name == "head"; };
  const GradientCheckReport r = gradient_check(s.inputs, s.params, s.config, s.rows, s.targets, 7, o);
  ASSERT_EQ(r.tensors.size(), 1u);
  EXPECT_LE(r.max_rel_error, 1e-8);
}

TEST(GradientCheck, StepSweepIsUShaped) {
  const CheckSetup s = check_setup(Variant::EvolMPNN);
  std::vector<double> err;
  for (int k = 1; k <= 11; ++k) {
    GradientCheckOptions o;
    o.eps = std::pow(10.0, -k);
    o.floor = 1e-7;
    err.push_back(gradient_check(s.inputs, s.params, s.config, s.rows, s.targets, 7, o).max_rel_error);
  }
  const auto best = std::min_element(err.begin(), err.end());
  EXPECT_NE(best, err.begin());
  EXPECT_NE(best, err.end() - 1);
  EXPECT_GT(err.front(), 10 * *best);
  EXPECT_GT(err.back(), 10 * *best);
}

TEST(LossAndGrad, Validation) {
  const CheckSetup s = check_setup(Variant::EvolMPNN);
  ModelParams g = zeros_like(s.params);
  EXPECT_THROW(loss_and_grad(s.inputs, s.params, s.config, std::vector<std::size_t>{}, s.targets, 0, g),
               ValidationError);
  EXPECT_THROW(loss_and_grad(s.inputs, s.params, s.config, s.rows, Matrix(2, 1), 0, g), ValidationError);
  ModelParams bad = s.params;
  bad.head(0, 0) = std::nan("");
  EXPECT_THROW(forward(s.inputs, bad, s.config, s.rows, 0), NumericError);
}

}  // namespace
}  // namespace evolmpnn
