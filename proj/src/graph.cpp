#include "evolmpnn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  const auto& row = adjacency[i];
  return std::any_of(row.begin(), row.end(), [j](const auto& e) { return e.first == j; });
}

std::size_t Graph::edge_count() const {
  std::size_t n = 0;
  for (const auto& row : adjacency) n += row.size();
  return n / 2;
}

Graph knn_graph(std::size_t n, std::size_t k, const DistanceFn& distance) {
  if (k == 0) throw ValidationError("knn: K must be at least 1");
  if (k >= n) throw ValidationError("knn: K must be smaller than the number of proteins");
  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(distance(i, j), j);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = cand[r].second;
      nbrs[i].push_back(j);
      nbrs[j].push_back(i);
    }
  }
  Graph g;
  g.k = k;
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = nbrs[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (std::size_t j : row) g.adjacency[i].emplace_back(j, 1.0);
  }
  return g;
}

Graph knn_graph(const Family& family, std::size_t k) {
  return knn_graph(family.size(), k, [&family](std::size_t i, std::size_t j) {
    const auto& a = family.encoded(i);
    const auto& b = family.encoded(j);
    std::size_t d = 0;
    for (std::size_t p = 0; p < a.size(); ++p) d += a[p] != b[p];
    return static_cast<double>(d);
  });
}

Graph knn_graph(const Matrix& features, std::size_t k) {
  return knn_graph(features.rows(), k, [&features](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < features.cols(); ++c) {
      const double e = features(i, c) - features(j, c);
      s += e * e;
    }
    return std::sqrt(s);
  });
}

}  // namespace evolmpnn
