#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evolmpnn {

/// The 20 canonical amino acids; a residue's index is its position here.
inline constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr std::size_t kAlphabetSize = 20;

/// Index of a residue letter in kAlphabet, or -1.
int residue_index(char residue);

struct ProteinRecord {
  std::string id;
  std::string sequence;
  std::vector<double> target;
  bool is_wild_type = false;
};

/// A homologous family: equal-length substitution mutants of one wild type.
///
/// Construction validates every invariant and reports the 1-based data row of
/// the first offending record.
class Family {
 public:
  explicit Family(std::vector<ProteinRecord> records);

  const std::vector<ProteinRecord>& records() const { return records_; }
  const ProteinRecord& record(std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  std::size_t length() const { return length_; }
  std::size_t target_dim() const { return target_dim_; }
  std::size_t wild_type_index() const { return wild_type_; }
  const ProteinRecord& wild_type() const { return records_[wild_type_]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Residue indices of record i, one byte per position.
  const std::vector<std::uint8_t>& encoded(std::size_t i) const { return encoded_[i]; }
  /// Hamming distance of record i to the wild type.
  std::size_t mutation_count(std::size_t i) const;

 private:
  std::vector<ProteinRecord> records_;
  std::vector<std::vector<std::uint8_t>> encoded_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t length_ = 0;
  std::size_t target_dim_ = 0;
  std::size_t wild_type_ = 0;
};

/// Number of differing positions; throws ValidationError on a length mismatch.
std::size_t hamming(std::string_view a, std::string_view b);

/// CSV with header `id,sequence,target,is_wild_type`. A target holding several
/// `;`-separated values yields a multi-property family.
Family read_family_csv(std::istream& in);
Family load_family(const std::filesystem::path& path);
void write_family_csv(std::ostream& out, const Family& family);
void save_family(const std::filesystem::path& path, const Family& family);

/// Copy of the family with records reordered by `order` (a permutation of row indices).
Family permuted(const Family& family, const std::vector<std::size_t>& order);

}  // namespace evolmpnn
