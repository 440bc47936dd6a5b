#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evolmpnn/family.hpp"

namespace evolmpnn {

/// Pairwise term: adds `weight` whenever position p holds residue a and q holds b.
struct EpistaticTerm {
  std::size_t p = 0;
  std::size_t q = 0;
  char a = 'A';
  char b = 'A';
  double weight = 0.0;
};

/// Synthetic fitness landscape y(s) = sum_p w[p][s_p] + sum of epistatic terms + noise.
struct LandscapeSpec {
  std::size_t n = 0;  // sequence length
  std::size_t m = 0;  // family size, wild type included
  std::size_t max_mutations = 1;
  std::vector<std::array<double, kAlphabetSize>> additive;  // n rows
  std::vector<EpistaticTerm> epistasis;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> wild_type;  // drawn uniformly when absent

  void validate() const;
};

LandscapeSpec landscape_from_json(const nlohmann::json& j);
nlohmann::json landscape_to_json(const LandscapeSpec& spec);

/// Noise-free landscape value of a sequence.
double landscape_value(const LandscapeSpec& spec, std::string_view sequence);

struct SyntheticFamily {
  Family family;
  std::vector<double> noise_free;  // ground truth per record, family order
};

/// Wild type first (id "wt"), then m-1 mutants with 1..max_mutations substitutions at distinct
/// positions. Sequences and noise come from separate seeded streams, so changing noise_std
/// leaves the sequences untouched.
SyntheticFamily synth_family(const LandscapeSpec& spec);

/// Parameters for drawing a random landscape: additive weights of the given rank
/// (w[p][a] = sum_r u[p][r] v[a][r]) plus pairwise "contact" terms that reward keeping both
/// wild-type residues of a pair.
struct RandomLandscapeOptions {
  std::size_t n = 16;
  std::size_t m = 64;
  std::size_t max_mutations = 4;
  std::size_t additive_rank = 2;
  double additive_scale = 1.0;
  std::size_t epistatic_terms = 0;
  double epistatic_scale = 1.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

LandscapeSpec random_landscape(const RandomLandscapeOptions& options);

/// Population standard deviation of the noise-free targets `spec` generates.
double noise_free_target_std(const LandscapeSpec& spec);

}  // namespace evolmpnn
