#include "evolmpnn/anchors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

std::size_t ceil_log2(std::size_t m) {
  if (m <= 1) return 0;
  return static_cast<std::size_t>(std::bit_width(m - 1));
}

std::size_t anchor_count(std::size_t m_train) {
  const std::size_t l = ceil_log2(m_train);
  return std::max<std::size_t>(1, l * l);
}

double inclusion_probability(std::size_t j, std::size_t m_train) {
  if (j == 0) throw ValidationError("anchor set index is 1-based");
  const std::size_t l = std::max<std::size_t>(1, ceil_log2(m_train));
  return std::ldexp(1.0, -static_cast<int>(1 + (j - 1) % l));
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_id(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<AnchorSet> sample_anchor_sets(const std::vector<std::string>& train_ids,
                                          const AnchorPolicy& policy, std::size_t layer_index,
                                          const std::string& fallback_id) {
  if (train_ids.empty()) throw ValidationError("anchor sampling needs at least one training id");
  std::vector<std::string> ids = train_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  const std::size_t m = ids.size();
  const std::size_t k = policy.k > 0 ? policy.k : anchor_count(m);
  const std::string& fallback =
      std::binary_search(ids.begin(), ids.end(), fallback_id) ? fallback_id : ids.front();
  const std::uint64_t layer_key = mix64(policy.seed ^ mix64(policy.resample ? layer_index : 0));

  std::vector<std::uint64_t> id_keys(m);
  for (std::size_t i = 0; i < m; ++i) id_keys[i] = hash_id(ids[i]);

  std::vector<AnchorSet> sets(k);
  for (std::size_t j = 1; j <= k; ++j) {
    AnchorSet& s = sets[j - 1];
    s.index = j;
    s.inclusion_prob = inclusion_probability(j, m);
    const std::uint64_t set_key = mix64(layer_key ^ mix64(j));
    for (std::size_t i = 0; i < m; ++i) {
      const double u = static_cast<double>(mix64(set_key ^ id_keys[i]) >> 11) * 0x1.0p-53;
      if (u < s.inclusion_prob) s.member_ids.push_back(ids[i]);
    }
    s.sampled_size = s.member_ids.size();
    if (s.member_ids.empty()) {
      s.member_ids.push_back(fallback);
      s.fallback = true;
    }
  }
  return sets;
}

}  // namespace evolmpnn
