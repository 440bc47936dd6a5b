#include "evolmpnn/family.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

namespace {

std::string at_row(std::size_t row) { return " at row " + std::to_string(row); }

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

int residue_index(char residue) {
  const auto pos = kAlphabet.find(residue);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

Family::Family(std::vector<ProteinRecord> records) : records_(std::move(records)) {
  if (records_.size() < 2) throw ValidationError("a family needs at least 2 records");
  length_ = records_.front().sequence.size();
  target_dim_ = records_.front().target.size();
  if (length_ == 0) throw ValidationError("empty sequence" + at_row(1));
  if (target_dim_ == 0) throw ValidationError("missing target" + at_row(1));
  std::optional<std::size_t> wt;
  encoded_.reserve(records_.size());
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const ProteinRecord& r = records_[i];
    const std::size_t row = i + 1;
    if (r.id.empty()) throw ValidationError("empty id" + at_row(row));
    if (!index_.emplace(r.id, i).second)
      throw ValidationError("duplicate id '" + r.id + "'" + at_row(row));
    if (r.sequence.size() != length_) throw ValidationError("unequal sequence lengths" + at_row(row));
    if (r.target.size() != target_dim_)
      throw ValidationError("unequal target dimensions" + at_row(row));
    for (double v : r.target)
      if (!std::isfinite(v)) throw ValidationError("non-finite target" + at_row(row));
    std::vector<std::uint8_t> enc(length_);
    for (std::size_t p = 0; p < length_; ++p) {
      const int idx = residue_index(r.sequence[p]);
      if (idx < 0)
        throw ValidationError(std::string("invalid residue '") + r.sequence[p] + "'" + at_row(row));
      enc[p] = static_cast<std::uint8_t>(idx);
    }
    encoded_.push_back(std::move(enc));
    if (r.is_wild_type) {
      if (wt) throw ValidationError("multiple wild-type rows" + at_row(row));
      wt = i;
    }
  }
  if (!wt) throw ValidationError("no wild-type row");
  wild_type_ = *wt;
}

std::optional<std::size_t> Family::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Family::mutation_count(std::size_t i) const {
  const auto& a = encoded_[i];
  const auto& b = encoded_[wild_type_];
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.size(); ++p) n += a[p] != b[p];
  return n;
}

std::size_t hamming(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) throw ValidationError("hamming: sequence length mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

Family read_family_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty family file");
  if (trim(line) != "id,sequence,target,is_wild_type")
    throw ValidationError("family header must be 'id,sequence,target,is_wild_type'");
  std::vector<ProteinRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(trim(line), ',');
    if (fields.size() != 4) throw ValidationError("expected 4 fields" + at_row(row));
    ProteinRecord r;
    r.id = std::string(trim(fields[0]));
    r.sequence = std::string(trim(fields[1]));
    for (std::string_view part : split_fields(fields[2], ';')) {
      double v = 0.0;
      if (!parse_double(part, v)) throw ValidationError("non-numeric target" + at_row(row));
      r.target.push_back(v);
    }
    const std::string_view wt = trim(fields[3]);
    if (wt == "1") {
      r.is_wild_type = true;
    } else if (wt != "0") {
      throw ValidationError("is_wild_type must be 0 or 1" + at_row(row));
    }
    records.push_back(std::move(r));
  }
  return Family(std::move(records));
}

Family load_family(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open family file " + path.string());
  return read_family_csv(in);
}

void write_family_csv(std::ostream& out, const Family& family) {
  out << "id,sequence,target,is_wild_type\n";
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  for (const ProteinRecord& r : family.records()) {
    out << r.id << ',' << r.sequence << ',';
    for (std::size_t j = 0; j < r.target.size(); ++j) out << (j ? ";" : "") << r.target[j];
    out << ',' << (r.is_wild_type ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

void save_family(const std::filesystem::path& path, const Family& family) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write family file " + path.string());
  write_family_csv(out, family);
}

Family permuted(const Family& family, const std::vector<std::size_t>& order) {
  if (order.size() != family.size()) throw ValidationError("permutation size mismatch");
  std::vector<ProteinRecord> records;
  records.reserve(order.size());
  for (std::size_t i : order) records.push_back(family.record(i));
  return Family(std::move(records));
}

}  // namespace evolmpnn
