#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace evolmpnn {

struct AnchorPolicy {
  std::size_t k = 0;  // 0 selects anchor_count(M_train)
  std::uint64_t seed = 0;
  bool resample = true;  // distinct sets per layer; otherwise every layer reuses layer 0's

  friend bool operator==(const AnchorPolicy&, const AnchorPolicy&) = default;
};

/// A landmark set S_j of training proteins (ids sorted ascending).
struct AnchorSet {
  std::size_t index = 1;  // j, 1-based
  std::vector<std::string> member_ids;
  double inclusion_prob = 1.0;
  bool fallback = false;         // the Bernoulli draw came out empty
  std::size_t sampled_size = 0;  // size of the draw before the fallback
};

/// Bit width of m - 1, i.e. ceil(log2 m) for m >= 1.
std::size_t ceil_log2(std::size_t m);

/// max(1, ceil(log2 m)^2).
std::size_t anchor_count(std::size_t m_train);

/// 2^-(1 + ((j - 1) mod L)) with L = max(1, ceil(log2 m)).
double inclusion_probability(std::size_t j, std::size_t m_train);

/// Stable 64-bit mixer (splitmix64 finaliser).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_id(const std::string& id);

/// k anchor sets over `train_ids`. Protein p joins S_j when a hash of (seed, layer, j, p)
/// falls below p_j, so the result does not depend on the order of `train_ids`. An empty
/// draw falls back to {fallback_id} when it is a training id, else to the smallest id.
std::vector<AnchorSet> sample_anchor_sets(const std::vector<std::string>& train_ids,
                                          const AnchorPolicy& policy, std::size_t layer_index,
                                          const std::string& fallback_id = {});

}  // namespace evolmpnn
