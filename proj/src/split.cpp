#include "evolmpnn/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <random>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Valid: return "valid";
    case SplitTag::Test: return "test";
  }
  return "?";
}

SplitTag parse_split_tag(std::string_view s) {
  if (s == "train") return SplitTag::Train;
  if (s == "valid") return SplitTag::Valid;
  if (s == "test") return SplitTag::Test;
  throw ValidationError("unknown split tag '" + std::string(s) + "'");
}

std::vector<std::size_t> SplitAssignment::rows(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == tag) out.push_back(i);
  return out;
}

std::size_t SplitAssignment::count(SplitTag tag) const {
  return static_cast<std::size_t>(std::count(tags.begin(), tags.end(), tag));
}

std::size_t validation_count(std::size_t pool_size, double valid_frac) {
  // Rounded up; the small slack keeps exact products like 0.1 * 2990 from tipping over.
  const double raw = valid_frac * static_cast<double>(pool_size);
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  // The wild type always stays in train.
  return std::min(n, pool_size == 0 ? 0 : pool_size - 1);
}

namespace {

void check_frac(double valid_frac) {
  if (!(valid_frac > 0.0 && valid_frac < 1.0))
    throw ValidationError("valid fraction must lie in (0, 1)");
}

SplitAssignment assign_pool(const Family& family, const std::vector<bool>& in_pool,
                            double valid_frac, std::uint64_t seed) {
  SplitAssignment split;
  split.tags.assign(family.size(), SplitTag::Test);
  std::vector<std::size_t> candidates;
  std::size_t pool_size = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (!in_pool[i]) continue;
    ++pool_size;
    split.tags[i] = SplitTag::Train;
    if (i != family.wild_type_index()) candidates.push_back(i);
  }
  const std::size_t n_valid = validation_count(pool_size, valid_frac);
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t k = 0; k < n_valid; ++k) split.tags[candidates[k]] = SplitTag::Valid;
  split.provenance.valid_frac = valid_frac;
  split.provenance.seed = seed;
  return split;
}

}  // namespace

SplitAssignment split_lambda_vs_rest(const Family& family, int lambda, double valid_frac,
                                     std::uint64_t seed) {
  if (lambda < 1) throw ValidationError("lambda must be a positive integer");
  check_frac(valid_frac);
  std::vector<bool> pool(family.size());
  for (std::size_t i = 0; i < family.size(); ++i)
    pool[i] = family.mutation_count(i) <= static_cast<std::size_t>(lambda);
  SplitAssignment split = assign_pool(family, pool, valid_frac, seed);
  split.provenance.name = "lambda-vs-rest";
  split.provenance.lambda = lambda;
  if (split.count(SplitTag::Test) == 0) split.warnings.push_back("test split is empty");
  return split;
}

SplitAssignment split_low_vs_high(const Family& family, double valid_frac, std::uint64_t seed) {
  if (family.target_dim() != 1)
    throw ValidationError("low-vs-high split needs a single scalar target");
  check_frac(valid_frac);
  const double wt = family.wild_type().target[0];
  std::vector<bool> pool(family.size());
  std::size_t mutants_in_pool = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    pool[i] = family.record(i).target[0] <= wt;
    if (pool[i] && i != family.wild_type_index()) ++mutants_in_pool;
  }
  if (mutants_in_pool == 0)
    throw ValidationError("every mutant scores above the wild type; train split would be empty");
  SplitAssignment split = assign_pool(family, pool, valid_frac, seed);
  split.provenance.name = "low-vs-high";
  if (split.count(SplitTag::Test) == 0)
    split.warnings.push_back("test split is empty: no target exceeds the wild type");
  return split;
}

SplitAssignment read_split_csv(std::istream& in, const Family& family) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty split file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,split") throw ValidationError("split header must be 'id,split'");
  std::vector<std::optional<SplitTag>> tags(family.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError("expected 2 fields at row " + std::to_string(row));
    const std::string id = line.substr(0, comma);
    const auto idx = family.index_of(id);
    if (!idx) throw ValidationError("unknown id '" + id + "' at row " + std::to_string(row));
    if (tags[*idx]) throw ValidationError("duplicate id '" + id + "' at row " + std::to_string(row));
    tags[*idx] = parse_split_tag(line.substr(comma + 1));
  }
  SplitAssignment split;
  split.provenance.name = "file";
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!tags[i]) throw ValidationError("split is missing id '" + family.record(i).id + "'");
    split.tags.push_back(*tags[i]);
  }
  if (split.count(SplitTag::Train) == 0) throw ValidationError("split has no train proteins");
  return split;
}

SplitAssignment load_split(const std::filesystem::path& path, const Family& family) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open split file " + path.string());
  return read_split_csv(in, family);
}

void write_split_csv(std::ostream& out, const Family& family, const SplitAssignment& split) {
  out << "id,split\n";
  for (std::size_t i = 0; i < family.size(); ++i)
    out << family.record(i).id << ',' << to_string(split.tags[i]) << '\n';
}

void save_split(const std::filesystem::path& path, const Family& family,
                const SplitAssignment& split) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write split file " + path.string());
  write_split_csv(out, family, split);
}

}  // namespace evolmpnn
