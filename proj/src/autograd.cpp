#include "evolmpnn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evolmpnn/error.hpp"

namespace evolmpnn::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.ref = &value;
  if (grad_sink != nullptr) {
    if (!grad_sink->same_shape(value)) throw ValidationError("gradient sink shape mismatch");
    n.requires_grad = true;
    n.backward = [grad_sink](Tape&, const Matrix& g, const Matrix&) { *grad_sink += g; };
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref != nullptr ? *n.ref : n.own;
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad(id) += g;
}

void Tape::backward(const Var& root, const Matrix& seed) {
  if (&root.tape() != this) throw ValidationError("backward root belongs to another tape");
  if (!seed.same_shape(root.value())) throw ValidationError("backward seed shape mismatch");
  if (!nodes_[root.id()].requires_grad) return;
  grad(root.id()) += seed;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, value(id));
  }
}

void Tape::backward(const Var& scalar_root) { backward(scalar_root, Matrix(1, 1, 1.0)); }

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ValidationError("operands live on different tapes");
  return a.tape();
}

bool needs(const Var& a) { return a.tape().requires_grad(a); }
bool needs(const Var& a, const Var& b) { return needs(a) || needs(b); }

void check_shape(bool ok, const char* op) {
  if (!ok) throw ValidationError(std::string("shape mismatch in ") + op);
}

Matrix column_sums(const Matrix& g) {
  Matrix s(1, g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) s(0, j) += g(i, j);
  return s;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  const int ia = a.id(), ib = b.id();
  return t.record(evolmpnn::matmul(a.value(), b.value()), needs(a, b),
                  [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                    if (t.requires_grad(ia)) t.accumulate(ia, matmul_nt(g, t.value(ib)));
                    if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(t.value(ia), g));
                  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt");
  const int ia = a.id(), ib = b.id();
  return t.record(evolmpnn::matmul_nt(a.value(), b.value()), needs(a, b),
                  [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                    if (t.requires_grad(ia)) t.accumulate(ia, evolmpnn::matmul(g, t.value(ib)));
                    if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(g, t.value(ia)));
                  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.value().same_shape(b.value()), "add");
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), needs(a, b),
                  [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                    t.accumulate(ia, g);
                    t.accumulate(ib, g);
                  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.value().same_shape(b.value()), "sub");
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), needs(a, b),
                  [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                    t.accumulate(ia, g);
                    if (t.requires_grad(ib)) t.grad(ib) -= g;
                  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.value().same_shape(b.value()), "mul");
  const int ia = a.id(), ib = b.id();
  return t.record(hadamard(a.value(), b.value()), needs(a, b),
                  [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                    if (t.requires_grad(ia)) t.accumulate(ia, hadamard(g, t.value(ib)));
                    if (t.requires_grad(ib)) t.accumulate(ib, hadamard(g, t.value(ia)));
                  });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape().record(a.value() * s, needs(a),
                         [ia, s](Tape& t, const Matrix& g, const Matrix&) {
                           t.accumulate(ia, g * s);
                         });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Matrix out = a.value();
  const Matrix& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r(0, j);
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(out), needs(a, row),
                  [ia, ir](Tape& t, const Matrix& g, const Matrix&) {
                    t.accumulate(ia, g);
                    if (t.requires_grad(ir)) t.accumulate(ir, column_sums(g));
                  });
}

Var sub_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "sub_row");
  Matrix out = a.value();
  const Matrix& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) -= r(0, j);
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(out), needs(a, row),
                  [ia, ir](Tape& t, const Matrix& g, const Matrix&) {
                    t.accumulate(ia, g);
                    if (t.requires_grad(ir)) t.grad(ir) -= column_sums(g);
                  });
}

Var mul_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "mul_row");
  Matrix out = a.value();
  const Matrix& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= r(0, j);
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(out), needs(a, row),
                  [ia, ir](Tape& t, const Matrix& g, const Matrix&) {
                    const Matrix& av = t.value(ia);
                    const Matrix& rv = t.value(ir);
                    if (t.requires_grad(ia)) {
                      Matrix& ga = t.grad(ia);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * rv(0, j);
                    }
                    if (t.requires_grad(ir)) {
                      Matrix& gr = t.grad(ir);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j) * av(i, j);
                    }
                  });
}

Var scale_rows(const Var& a, std::span<const double> weights) {
  check_shape(weights.size() == a.rows(), "scale_rows");
  std::vector<double> w(weights.begin(), weights.end());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= w[i];
  const int ia = a.id();
  return a.tape().record(std::move(out), needs(a),
                         [ia, w = std::move(w)](Tape& t, const Matrix& g, const Matrix&) {
                           Matrix& ga = t.grad(ia);
                           for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) * w[i];
                         });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    if (r.empty()) continue;
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : r) v /= s;
  }
  const int ia = a.id();
  return a.tape().record(std::move(y), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var elu(const Var& a) {
  Matrix y = a.value();
  for (double& v : y.values()) v = v > 0.0 ? v : std::expm1(v);
  const int ia = a.id();
  return a.tape().record(std::move(y), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix& ga = t.grad(ia);
    const Matrix& x = t.value(ia);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double slope = x.values()[k] > 0.0 ? 1.0 : y.values()[k] + 1.0;
      ga.values()[k] += g.values()[k] * slope;
    }
  });
}

Var sigmoid(const Var& a) {
  Matrix y = a.value();
  for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
  const int ia = a.id();
  return a.tape().record(std::move(y), needs(a), [ia](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double s = y.values()[k];
      ga.values()[k] += g.values()[k] * s * (1.0 - s);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape& t = same_tape(x, gain);
  same_tape(x, bias);
  const std::size_t d = x.cols();
  check_shape(gain.rows() == 1 && gain.cols() == d && bias.value().same_shape(gain.value()),
              "layer_norm");
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  Matrix normed(xv.rows(), d);
  std::vector<double> inv_std(xv.rows());
  Matrix y(xv.rows(), d);
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv(i, j);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      normed(i, j) = (xv(i, j) - mean) * inv_std[i];
      y(i, j) = normed(i, j) * gv(0, j) + bv(0, j);
    }
  }
  const bool rg = needs(x) || needs(gain) || needs(bias);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(std::move(y), rg,
                  [ix, ig, ib, normed = std::move(normed), inv_std = std::move(inv_std)](
                      Tape& t, const Matrix& g, const Matrix&) {
                    const std::size_t d = normed.cols();
                    const Matrix& gv = t.value(ig);
                    if (t.requires_grad(ig) || t.requires_grad(ib)) {
                      Matrix dg(1, d), db(1, d);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < d; ++j) {
                          dg(0, j) += g(i, j) * normed(i, j);
                          db(0, j) += g(i, j);
                        }
                      t.accumulate(ig, dg);
                      t.accumulate(ib, db);
                    }
                    if (!t.requires_grad(ix)) return;
                    Matrix& gx = t.grad(ix);
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      double sum_dn = 0.0, sum_dn_n = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dn = g(i, j) * gv(0, j);
                        sum_dn += dn;
                        sum_dn_n += dn * normed(i, j);
                      }
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dn = g(i, j) * gv(0, j);
                        gx(i, j) += inv_std[i] * (dn - inv_d * sum_dn - normed(i, j) * inv_d * sum_dn_n);
                      }
                    }
                  });
}

Var mean_rows(const Var& a) {
  const int ia = a.id();
  const std::size_t n = a.rows();
  return a.tape().record(column_mean(a.value()), needs(a),
                         [ia, n](Tape& t, const Matrix& g, const Matrix&) {
                           Matrix& ga = t.grad(ia);
                           const double s = 1.0 / static_cast<double>(n);
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(0, j) * s;
                         });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_shape(a.rows() == b.rows(), "concat_cols");
  const std::size_t ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.value().row(i).begin(), a.value().row(i).end(), out.row(i).begin());
    std::copy(b.value().row(i).begin(), b.value().row(i).end(), out.row(i).begin() + ca);
  }
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), needs(a, b),
                  [ia, ib, ca, cb](Tape& t, const Matrix& g, const Matrix&) {
                    if (t.requires_grad(ia)) {
                      Matrix& ga = t.grad(ia);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
                    }
                    if (t.requires_grad(ib)) {
                      Matrix& gb = t.grad(ib);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
                    }
                  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ValidationError("stack_rows needs at least one row");
  Tape& t = rows.front().tape();
  const std::size_t c = rows.front().cols();
  Matrix out(rows.size(), c);
  std::vector<int> ids;
  ids.reserve(rows.size());
  bool rg = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    same_tape(rows.front(), rows[i]);
    check_shape(rows[i].rows() == 1 && rows[i].cols() == c, "stack_rows");
    std::copy(rows[i].value().row(0).begin(), rows[i].value().row(0).end(), out.row(i).begin());
    ids.push_back(rows[i].id());
    rg = rg || needs(rows[i]);
  }
  return t.record(std::move(out), rg, [ids = std::move(ids)](Tape& t, const Matrix& g, const Matrix&) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Matrix& gi = t.grad(ids[i]);
      for (std::size_t j = 0; j < g.cols(); ++j) gi(0, j) += g(i, j);
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> indices) {
  const Matrix& tv = table.value();
  Matrix out(indices.size(), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tv.rows()) throw ValidationError("gather_rows index out of range");
    std::copy(tv.row(indices[i]).begin(), tv.row(indices[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const int it = table.id();
  return table.tape().record(std::move(out), needs(table),
                             [it, idx = std::move(idx)](Tape& t, const Matrix& g, const Matrix&) {
                               Matrix& gt = t.grad(it);
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < g.cols(); ++j) gt(idx[i], j) += g(i, j);
                             });
}

Var group_mean(const Var& a, const std::vector<std::vector<std::size_t>>& groups) {
  const Matrix& av = a.value();
  Matrix out(groups.size(), av.cols());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    auto o = out.row(k);
    for (std::size_t r : groups[k]) {
      if (r >= av.rows()) throw ValidationError("group_mean index out of range");
      for (std::size_t j = 0; j < av.cols(); ++j) o[j] += av(r, j);
    }
    const double s = 1.0 / static_cast<double>(groups[k].size());
    for (double& v : o) v *= s;
  }
  const int ia = a.id();
  return a.tape().record(std::move(out), needs(a), [ia, groups](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (groups[k].empty()) continue;
      const double s = 1.0 / static_cast<double>(groups[k].size());
      for (std::size_t r : groups[k])
        for (std::size_t j = 0; j < g.cols(); ++j) ga(r, j) += g(k, j) * s;
    }
  });
}

Var sparse_matmul(const SparseRows& s, const Var& x) {
  check_shape(s.cols == x.rows(), "sparse_matmul");
  const Matrix& xv = x.value();
  Matrix out(s.rows.size(), xv.cols());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    auto o = out.row(i);
    for (const auto& [j, w] : s.rows[i])
      for (std::size_t c = 0; c < xv.cols(); ++c) o[c] += w * xv(j, c);
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), needs(x), [ix, s](Tape& t, const Matrix& g, const Matrix&) {
    Matrix& gx = t.grad(ix);
    for (std::size_t i = 0; i < s.rows.size(); ++i)
      for (const auto& [j, w] : s.rows[i])
        for (std::size_t c = 0; c < g.cols(); ++c) gx(j, c) += w * g(i, c);
  });
}

Var mse(const Var& pred, const Matrix& target, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ValidationError("mse over an empty row mask");
  const Matrix& p = pred.value();
  check_shape(p.same_shape(target), "mse");
  double sum = 0.0;
  for (std::size_t r : rows) {
    if (r >= p.rows()) throw ValidationError("mse row out of range");
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double e = p(r, j) - target(r, j);
      sum += e * e;
    }
  }
  const double count = static_cast<double>(rows.size() * p.cols());
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const int ip = pred.id();
  return pred.tape().record(
      Matrix(1, 1, sum / count), needs(pred),
      [ip, idx = std::move(idx), target, count](Tape& t, const Matrix& g, const Matrix&) {
        const Matrix& p = t.value(ip);
        Matrix& gp = t.grad(ip);
        const double s = 2.0 * g(0, 0) / count;
        for (std::size_t r : idx)
          for (std::size_t j = 0; j < p.cols(); ++j) gp(r, j) += s * (p(r, j) - target(r, j));
      });
}

}  // namespace evolmpnn::ad
