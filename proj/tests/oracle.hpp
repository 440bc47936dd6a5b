#pragma once

// Literal loop evaluations used as independent references; nothing here calls the library's
// kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "evolmpnn/matrix.hpp"
#include "evolmpnn/residue_encoder.hpp"

namespace evolmpnn::oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows rows_of(const Matrix& m) {
  Rows out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Rows mm(const Rows& a, const Rows& b) {
  Rows c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// One encoder layer; `bias`, when non-empty, is added to every head's logits.
inline Rows attention(const Rows& x, const AttentionLayerParams& p, const Rows& bias = {}) {
  const std::size_t n = x.size(), d = x[0].size();
  Rows y = x;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    const Rows q = mm(x, rows_of(p.query[h])), k = mm(x, rows_of(p.key[h]));
    const Rows vo = mm(mm(x, rows_of(p.value[h])), rows_of(p.output[h]));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logit(n);
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < q[i].size(); ++c) s += q[i][c] * k[j][c];
        logit[j] = s / std::sqrt(static_cast<double>(d)) + (bias.empty() ? 0.0 : bias[i][j]);
        mx = std::max(mx, logit[j]);
      }
      double z = 0.0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < d; ++c) y[i][c] += logit[j] / z * vo[j][c];
    }
  }
  Rows hidden = mm(y, rows_of(p.ffn_in));
  for (auto& r : hidden)
    for (double& v : r) v = v > 0 ? v : std::expm1(v);
  const Rows f = mm(hidden, rows_of(p.ffn_out));
  Rows out(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += y[i][c] + f[i][c];
    mean /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) var += std::pow(y[i][c] + f[i][c] - mean, 2);
    var /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c)
      out[i][c] = (y[i][c] + f[i][c] - mean) / std::sqrt(var + 1e-5) * p.norm_gain(0, c) + p.norm_bias(0, c);
  }
  return out;
}

/// Spearman from ranks counted pairwise: rank = #smaller + (#equal + 1) / 2.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double less = 0, equal = 0;
      for (double v : x) {
        less += v < x[i];
        equal += v == x[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += ra[i];
    sb += rb[i];
  }
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - sa / n) * (rb[i] - sb / n);
    da += (ra[i] - sa / n) * (ra[i] - sa / n);
    db += (rb[i] - sb / n) * (rb[i] - sb / n);
  }
  return num / std::sqrt(da * db);
}

/// Distortion as the largest ratio between any two pairs' stretch factors e/f.
template <class Base>
double distortion(const Matrix& x, Base base, double p) {
  std::vector<double> stretch;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      const double f = base(i, j);
      if (f == 0) continue;
      double e = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) e += std::pow(std::abs(x(i, c) - x(j, c)), p);
      stretch.push_back(std::pow(e, 1 / p) / f);
    }
  double worst = 1;
  for (double u : stretch)
    for (double v : stretch) worst = std::max(worst, u / v);
  return worst;
}

}  // namespace evolmpnn::oracle
