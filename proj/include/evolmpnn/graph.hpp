#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "evolmpnn/family.hpp"
#include "evolmpnn/matrix.hpp"

namespace evolmpnn {

/// Undirected weighted protein graph stored as sorted adjacency lists.
struct Graph {
  std::size_t k = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;

  std::size_t nodes() const { return adjacency.size(); }
  std::size_t degree(std::size_t i) const { return adjacency[i].size(); }
  bool has_edge(std::size_t i, std::size_t j) const;
  std::size_t edge_count() const;  // undirected edges
};

using DistanceFn = std::function<double(std::size_t, std::size_t)>;

/// Directed K-NN under `distance` (ties go to the lower index), symmetrised by
/// union, unit weights. Throws if k == 0 or k >= n.
Graph knn_graph(std::size_t n, std::size_t k, const DistanceFn& distance);
/// K-NN under Hamming distance between family sequences.
Graph knn_graph(const Family& family, std::size_t k);
/// K-NN under Euclidean distance between the rows of a precomputed embedding matrix.
Graph knn_graph(const Matrix& features, std::size_t k);

}  // namespace evolmpnn
