#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "evolmpnn/family.hpp"

namespace evolmpnn {

enum class SplitTag { Train, Valid, Test };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view s);

struct SplitProvenance {
  std::string name;  // "lambda-vs-rest", "low-vs-high" or "file"
  int lambda = 0;
  double valid_frac = 0.0;
  std::uint64_t seed = 0;
};

/// Train/valid/test membership, one tag per family record (family order).
struct SplitAssignment {
  std::vector<SplitTag> tags;
  SplitProvenance provenance;
  std::vector<std::string> warnings;

  std::vector<std::size_t> rows(SplitTag tag) const;
  std::size_t count(SplitTag tag) const;
};

/// Number of validation proteins drawn from a pool of `pool_size` (wild type included).
std::size_t validation_count(std::size_t pool_size, double valid_frac);

/// Proteins within `lambda` substitutions of the wild type form train+valid; the rest are test.
SplitAssignment split_lambda_vs_rest(const Family& family, int lambda, double valid_frac,
                                     std::uint64_t seed);

/// Proteins with target <= the wild type's form train+valid; strictly higher targets are test.
SplitAssignment split_low_vs_high(const Family& family, double valid_frac, std::uint64_t seed);

/// Split CSV: header `id,split`.
SplitAssignment read_split_csv(std::istream& in, const Family& family);
SplitAssignment load_split(const std::filesystem::path& path, const Family& family);
void write_split_csv(std::ostream& out, const Family& family, const SplitAssignment& split);
void save_split(const std::filesystem::path& path, const Family& family, const SplitAssignment& split);

}  // namespace evolmpnn
