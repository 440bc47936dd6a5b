#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evolmpnn/family.hpp"
#include "evolmpnn/landscape.hpp"
#include "evolmpnn/matrix.hpp"

namespace evolmpnn::testing {

inline Family family_from_csv(const std::string& body) {
  std::istringstream in("id,sequence,target,is_wild_type\n" + body);
  return read_family_csv(in);
}

/// Small synthetic family; the wild type is row 0.
inline Family small_family(std::size_t m, std::size_t n, std::size_t max_mut, std::uint64_t seed,
                           std::size_t rank = 2, std::size_t epistatic = 0) {
  RandomLandscapeOptions o;
  o.n = n;
  o.m = m;
  o.max_mutations = max_mut;
  o.additive_rank = rank;
  o.epistatic_terms = epistatic;
  o.seed = seed;
  return synth_family(random_landscape(o)).family;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = g(rng);
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("evolmpnn_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace evolmpnn::testing
