#include "evolmpnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "evolmpnn/anchors.hpp"
#include "evolmpnn/error.hpp"

namespace evolmpnn {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && x[idx[j]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = rank;
    i = j;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::optional<double> try_spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman inputs differ in length");
  if (a.size() < 2) return std::nullopt;
  return pearson(average_ranks(a), average_ranks(b));
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman inputs differ in length");
  if (a.size() < 2) throw ValidationError("spearman needs at least 2 values");
  const auto rho = try_spearman(a, b);
  if (!rho) throw ValidationError("spearman is undefined for a constant input");
  return *rho;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& g : m.by_mutation_count) {
    nlohmann::json e{{"n", g.n}, {"rho", nullptr}};
    if (g.rho) e["rho"] = *g.rho;
    groups[g.name] = e;
  }
  nlohmann::json j{{"spearman", nullptr}, {"mse", m.mse}, {"by_mutation_count", groups}, {"runtime_s", m.runtime_s}};
  if (m.spearman) j["spearman"] = *m.spearman;
  return j;
}

std::string group_name(const std::vector<std::size_t>& edges, std::size_t g) {
  if (g + 1 >= edges.size()) return std::to_string(edges[g]) + "+";
  const std::size_t lo = edges[g], hi = edges[g + 1] - 1;
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

std::vector<std::size_t> parse_group_edges(const std::string& text) {
  std::vector<std::size_t> edges;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-')
      throw ValidationError("bad group edge '" + item + "'");
    edges.push_back(v);
  }
  if (edges.empty()) throw ValidationError("group edges are empty");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] <= edges[i - 1]) throw ValidationError("group edges must increase strictly");
  return edges;
}

std::optional<std::size_t> mutation_group(const std::vector<std::size_t>& edges, std::size_t count) {
  if (edges.empty() || count < edges.front()) return std::nullopt;
  const auto it = std::upper_bound(edges.begin(), edges.end(), count);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

std::vector<GroupMetrics> grouped_spearman(std::span<const double> pred, std::span<const double> target,
                                           std::span<const std::size_t> mutation_counts,
                                           const std::vector<std::size_t>& edges) {
  if (pred.size() != target.size() || pred.size() != mutation_counts.size())
    throw ValidationError("grouped spearman inputs differ in length");
  std::vector<std::vector<double>> gp(edges.size()), gt(edges.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto g = mutation_group(edges, mutation_counts[i]);
    if (!g) continue;
    gp[*g].push_back(pred[i]);
    gt[*g].push_back(target[i]);
  }
  std::vector<GroupMetrics> out;
  for (std::size_t g = 0; g < edges.size(); ++g) {
    GroupMetrics m{group_name(edges, g), gp[g].size(), std::nullopt};
    if (gp[g].size() >= 2) m.rho = try_spearman(gp[g], gt[g]);
    out.push_back(std::move(m));
  }
  return out;
}

Metrics score(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw ValidationError("prediction and target shapes differ");
  if (pred.rows() == 0) throw ValidationError("nothing to score");
  Metrics m;
  double total = 0.0, se = 0.0;
  bool defined = true;
  for (std::size_t j = 0; j < pred.cols(); ++j) {
    std::vector<double> a(pred.rows()), b(pred.rows());
    for (std::size_t i = 0; i < pred.rows(); ++i) {
      a[i] = pred(i, j);
      b[i] = target(i, j);
      se += (a[i] - b[i]) * (a[i] - b[i]);
    }
    const auto rho = try_spearman(a, b);
    if (rho) total += *rho;
    defined = defined && rho.has_value();
  }
  if (defined) m.spearman = total / static_cast<double>(pred.cols());
  m.mse = se / static_cast<double>(pred.size());
  return m;
}

namespace {

Matrix target_rows(const Family& family, const std::vector<std::size_t>& rows) {
  Matrix y(rows.size(), family.target_dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < family.target_dim(); ++j) y(i, j) = family.record(rows[i]).target[j];
  return y;
}

std::vector<double> first_column(const Matrix& m) {
  std::vector<double> c(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) c[i] = m(i, 0);
  return c;
}

Metrics score_rows(const Family& family, const std::vector<std::size_t>& rows, const Matrix& pred,
                   const std::vector<std::size_t>& edges) {
  const Matrix target = target_rows(family, rows);
  Metrics m = score(pred, target);
  std::vector<std::size_t> counts(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) counts[i] = family.mutation_count(rows[i]);
  m.by_mutation_count = grouped_spearman(first_column(pred), first_column(target), counts, edges);
  return m;
}

std::vector<std::size_t> tagged_rows(const SplitAssignment& split, SplitTag tag) {
  std::vector<std::size_t> rows = split.rows(tag);
  if (rows.empty()) throw ValidationError("split '" + std::string(to_string(tag)) + "' is empty");
  return rows;
}

}  // namespace

Metrics evaluate(const TrainedModel& model, const Family& family, const SplitAssignment& split,
                 SplitTag tag, const std::vector<std::size_t>& group_edges,
                 const ResidueEmbeddings* residue_sidecar, const ProteinEmbeddings* protein_sidecar) {
  if (model.config.target_dim != family.target_dim())
    throw ValidationError("model target dimension does not match the family");
  const std::vector<std::size_t> rows = tagged_rows(split, tag);
  const ModelInputs inputs = make_inputs(family, split, model.config, residue_sidecar, protein_sidecar);
  return score_rows(family, rows, predict(model, inputs, rows), group_edges);
}

std::vector<GroupMetrics> eval_by_mutation_count(const TrainedModel& model, const Family& family,
                                                 const SplitAssignment& split,
                                                 const std::vector<std::size_t>& group_edges,
                                                 const ResidueEmbeddings* residue_sidecar,
                                                 const ProteinEmbeddings* protein_sidecar) {
  return evaluate(model, family, split, SplitTag::Test, group_edges, residue_sidecar, protein_sidecar)
      .by_mutation_count;
}

nlohmann::json to_json(const DistortionReport& r) {
  nlohmann::json j{{"alpha", nullptr}, {"pairs", r.pairs}, {"metric", r.metric}};
  if (std::isfinite(r.alpha)) j["alpha"] = r.alpha;
  else j["alpha"] = "inf";
  return j;
}

DistortionReport distortion(const Matrix& embedded, const DistanceFn& base, double p,
                            const std::string& metric) {
  if (!(p >= 1.0)) throw ValidationError("distortion needs p >= 1");
  DistortionReport r;
  r.metric = metric;
  double expansion = 0.0, contraction = 0.0;
  bool collapsed = false;
  for (std::size_t i = 0; i < embedded.rows(); ++i)
    for (std::size_t j = i + 1; j < embedded.rows(); ++j) {
      const double f = base(i, j);
      if (f < 0.0 || !std::isfinite(f)) throw ValidationError("base distances must be finite and >= 0");
      if (f == 0.0) continue;
      double e = 0.0;
      for (std::size_t c = 0; c < embedded.cols(); ++c) e += std::pow(std::abs(embedded(i, c) - embedded(j, c)), p);
      e = std::pow(e, 1.0 / p);
      ++r.pairs;
      if (e == 0.0) {
        collapsed = true;
        continue;
      }
      expansion = std::max(expansion, e / f);
      contraction = std::max(contraction, f / e);
    }
  if (collapsed) r.alpha = std::numeric_limits<double>::infinity();
  else if (r.pairs > 0) r.alpha = expansion * contraction;
  return r;
}

DistortionReport distortion(const Matrix& embedded, const Family& family, double p) {
  if (embedded.rows() != family.size()) throw ValidationError("embedding rows do not match the family");
  return distortion(
      embedded,
      [&](std::size_t i, std::size_t j) {
        return static_cast<double>(hamming(family.record(i).sequence, family.record(j).sequence));
      },
      p, "hamming");
}

Matrix reference_embedder(std::size_t n, const DistanceFn& base, std::size_t k, std::uint64_t seed) {
  if (n == 0) throw ValidationError("reference embedder needs at least one point");
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  AnchorPolicy policy;
  policy.k = k;
  policy.seed = seed;
  const std::vector<AnchorSet> sets = sample_anchor_sets(ids, policy, 0, "0");
  Matrix f(n, sets.size());
  const double inv_k = 1.0 / static_cast<double>(sets.size());
  for (std::size_t j = 0; j < sets.size(); ++j) {
    std::vector<std::size_t> members;
    for (const auto& id : sets[j].member_ids) members.push_back(std::stoul(id));
    for (std::size_t x = 0; x < n; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t s : members) best = std::min(best, base(x, s));
      f(x, j) = best * inv_k;
    }
  }
  return f;
}

Metrics linear_baseline(const Family& family, const SplitAssignment& split, SplitTag tag,
                        const std::vector<std::size_t>& group_edges, double lambda) {
  if (split.tags.size() != family.size()) throw ValidationError("split does not match the family");
  std::vector<std::size_t> fit = split.rows(SplitTag::Train);
  const auto valid = split.rows(SplitTag::Valid);
  fit.insert(fit.end(), valid.begin(), valid.end());
  std::sort(fit.begin(), fit.end());
  const std::vector<std::size_t> rows = tagged_rows(split, tag);

  const std::size_t p = family.length() * kAlphabetSize;
  const std::size_t t = family.target_dim();
  auto features = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& enc = family.encoded(idx[i]);
      for (std::size_t pos = 0; pos < enc.size(); ++pos)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pos * kAlphabetSize + enc[pos])) = 1.0;
    }
    return x;
  };
  Eigen::MatrixXd x = features(fit);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(fit.size()), static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < fit.size(); ++i)
    for (std::size_t j = 0; j < t; ++j)
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = family.record(fit[i]).target[j];

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  x.rowwise() -= x_mean;
  y.rowwise() -= y_mean;

  Eigen::MatrixXd w;
  if (x.rows() < x.cols()) {
    Eigen::MatrixXd gram = x * x.transpose();
    gram.diagonal().array() += lambda;
    w = x.transpose() * gram.ldlt().solve(y);
  } else {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(x.transpose() * y);
  }

  Eigen::MatrixXd xt = features(rows);
  xt.rowwise() -= x_mean;
  Eigen::MatrixXd yt = xt * w;
  yt.rowwise() += y_mean;
  Matrix pred(rows.size(), t);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < t; ++j) pred(i, j) = yt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return score_rows(family, rows, pred, group_edges);
}

}  // namespace evolmpnn
