#include "evolmpnn/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

Matrix ResidueEmbeddings::protein(std::size_t i) const {
  Matrix r(length, dim);
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(i * length * dim);
  std::copy(first, first + static_cast<std::ptrdiff_t>(length * dim), r.values().begin());
  return r;
}

void ResidueEmbeddings::set_protein(std::size_t i, const Matrix& r) {
  if (r.rows() != length || r.cols() != dim) throw ValidationError("residue block shape mismatch");
  std::copy(r.values().begin(), r.values().end(),
            values.begin() + static_cast<std::ptrdiff_t>(i * length * dim));
}

ResidueEmbeddings onehot_residues(const Family& family, const Matrix& projection) {
  if (projection.rows() != kAlphabetSize) throw ValidationError("one-hot projection must have 20 rows");
  ResidueEmbeddings x(family.size(), family.length(), projection.cols());
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& enc = family.encoded(i);
    for (std::size_t p = 0; p < enc.size(); ++p) {
      const auto src = projection.row(enc[p]);
      std::copy(src.begin(), src.end(),
                x.values.begin() + static_cast<std::ptrdiff_t>((i * x.length + p) * x.dim));
    }
  }
  return x;
}

ResidueEmbeddings apply_positional(const ResidueEmbeddings& x, const Matrix& positional) {
  if (positional.rows() != x.length || positional.cols() != x.dim)
    throw ValidationError("positional table shape does not match residue embeddings");
  ResidueEmbeddings out = x;
  const std::size_t block = x.length * x.dim;
  for (std::size_t i = 0; i < x.proteins; ++i)
    for (std::size_t k = 0; k < block; ++k) out.values[i * block + k] *= positional.values()[k];
  return out;
}

Matrix init_positional(std::size_t length, std::size_t dim, std::mt19937_64& rng, double std) {
  std::normal_distribution<double> g(1.0, std);
  Matrix pos(length, dim);
  for (double& v : pos.values()) v = g(rng);
  return pos;
}

Matrix residue_composition(const Family& family) {
  Matrix c(family.size(), kAlphabetSize);
  const double w = 1.0 / static_cast<double>(family.length());
  for (std::size_t i = 0; i < family.size(); ++i)
    for (std::uint8_t a : family.encoded(i)) c(i, a) += w;
  return c;
}

ProteinEmbeddings init_protein_embeddings(const Family& family, ProteinMode mode, std::size_t dim,
                                          const Matrix* projection,
                                          const ProteinEmbeddings* sidecar) {
  if (mode == ProteinMode::OneHotMean) {
    if (projection == nullptr || projection->rows() != kAlphabetSize || projection->cols() != dim)
      throw ValidationError("protein projection must be 20 x d");
    return ProteinEmbeddings{matmul(residue_composition(family), *projection)};
  }
  if (sidecar == nullptr) throw ValidationError("protein sidecar embeddings are missing");
  if (sidecar->values.cols() != dim)
    throw ValidationError("protein sidecar dimension " + std::to_string(sidecar->values.cols()) +
                          " does not match d = " + std::to_string(dim));
  if (sidecar->values.rows() != family.size())
    throw ValidationError("protein sidecar row count does not match the family");
  return *sidecar;
}

namespace {

constexpr char kMagic[4] = {'E', 'V', 'S', 'C'};

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xffu));
}

void put_floats(std::string& out, const std::vector<float>& v) {
  for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::string base64_encode(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::string base64_decode(std::string text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::size_t pad = 0;
  while (!text.empty() && text.back() == '=') {
    text.pop_back();
    ++pad;
  }
  try {
    return std::string(It(text.begin()), It(text.end()));
  } catch (const std::exception&) {
    throw ValidationError("sidecar: invalid base64 payload");
  }
}

SidecarTable read_sidecar_json(const std::string& text, const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("sidecar " + path.string() + ": " + e.what());
  }
  SidecarTable t;
  t.dim = j.at("dim").get<std::size_t>();
  for (const auto& r : j.at("records")) {
    t.ids.push_back(r.at("id").get<std::string>());
    const std::string bytes = base64_decode(r.at("data").get<std::string>());
    if (bytes.size() % 4 != 0) throw ValidationError("sidecar: payload is not whole float32 values");
    std::vector<float> v(bytes.size() / 4);
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = std::bit_cast<float>(read_u32(reinterpret_cast<const unsigned char*>(bytes.data()) + 4 * k));
      if (!std::isfinite(v[k]))
        throw ValidationError("sidecar: non-finite value in record '" + t.ids.back() +
                              "' at float " + std::to_string(k));
    }
    t.payloads.push_back(std::move(v));
  }
  return t;
}

}  // namespace

SidecarTable read_sidecar(const std::filesystem::path& path, std::size_t rows_per_record) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open sidecar " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto first = data.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && data[first] == '{') {
    SidecarTable t = read_sidecar_json(data, path);
    for (std::size_t k = 0; k < t.ids.size(); ++k)
      if (t.payloads[k].size() != rows_per_record * t.dim)
        throw ValidationError("sidecar " + path.string() + ": record '" + t.ids[k] + "' holds " +
                              std::to_string(t.payloads[k].size()) + " floats, expected " +
                              std::to_string(rows_per_record * t.dim));
    return t;
  }

  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  if (data.size() < 16 || !std::equal(kMagic, kMagic + 4, data.begin()))
    throw ValidationError("sidecar " + path.string() + ": bad header");
  const std::uint32_t count = read_u32(bytes + 4);
  SidecarTable t;
  t.dim = read_u32(bytes + 8);
  const std::size_t floats = rows_per_record * t.dim;
  std::size_t off = 16;
  for (std::uint32_t r = 0; r < count; ++r) {
    if (off + 2 > data.size())
      throw ValidationError("sidecar " + path.string() + ": truncated at byte offset " + std::to_string(off));
    const std::size_t len = bytes[off] | (static_cast<std::size_t>(bytes[off + 1]) << 8);
    off += 2;
    if (off + len + 4 * floats > data.size())
      throw ValidationError("sidecar " + path.string() + ": truncated at byte offset " + std::to_string(off));
    t.ids.emplace_back(data.substr(off, len));
    off += len;
    std::vector<float> v(floats);
    for (std::size_t k = 0; k < floats; ++k, off += 4) {
      v[k] = std::bit_cast<float>(read_u32(bytes + off));
      if (!std::isfinite(v[k]))
        throw ValidationError("sidecar " + path.string() + ": non-finite value at byte offset " +
                              std::to_string(off));
    }
    t.payloads.push_back(std::move(v));
  }
  if (off != data.size())
    throw ValidationError("sidecar " + path.string() + ": trailing bytes after " + std::to_string(count) + " records");
  return t;
}

void write_sidecar(const std::filesystem::path& path, const SidecarTable& table) {
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(table.ids.size()));
  put_u32(out, static_cast<std::uint32_t>(table.dim));
  put_u32(out, 0);
  for (std::size_t k = 0; k < table.ids.size(); ++k) {
    const std::string& id = table.ids[k];
    if (id.size() > 0xffff) throw ValidationError("sidecar id longer than 65535 bytes");
    out.push_back(static_cast<char>(id.size() & 0xff));
    out.push_back(static_cast<char>((id.size() >> 8) & 0xff));
    out += id;
    put_floats(out, table.payloads[k]);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write sidecar " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void write_sidecar_json(const std::filesystem::path& path, const SidecarTable& table) {
  nlohmann::json j;
  j["dim"] = table.dim;
  j["records"] = nlohmann::json::array();
  for (std::size_t k = 0; k < table.ids.size(); ++k) {
    std::string bytes;
    put_floats(bytes, table.payloads[k]);
    j["records"].push_back({{"id", table.ids[k]}, {"data", base64_encode(bytes)}});
  }
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write sidecar " + path.string());
  f << j.dump();
}

namespace {

std::vector<const std::vector<float>*> align_to_family(const Family& family, const SidecarTable& t,
                                                       const std::filesystem::path& path) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t k = 0; k < t.ids.size(); ++k) where.emplace(t.ids[k], k);
  std::vector<const std::vector<float>*> rows;
  rows.reserve(family.size());
  for (const auto& r : family.records()) {
    const auto it = where.find(r.id);
    if (it == where.end())
      throw ValidationError("sidecar " + path.string() + " has no record for id '" + r.id + "'");
    rows.push_back(&t.payloads[it->second]);
  }
  return rows;
}

}  // namespace

ProteinEmbeddings load_protein_sidecar(const Family& family, const std::filesystem::path& path) {
  const SidecarTable t = read_sidecar(path, 1);
  const auto rows = align_to_family(family, t, path);
  ProteinEmbeddings h{Matrix(family.size(), t.dim)};
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i]->begin(), rows[i]->end(), h.values.row(i).begin());
  return h;
}

ResidueEmbeddings load_residue_sidecar(const Family& family, const std::filesystem::path& path) {
  const SidecarTable t = read_sidecar(path, family.length());
  const auto rows = align_to_family(family, t, path);
  ResidueEmbeddings x(family.size(), family.length(), t.dim);
  const std::size_t block = family.length() * t.dim;
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i]->begin(), rows[i]->end(),
              x.values.begin() + static_cast<std::ptrdiff_t>(i * block));
  return x;
}

std::pair<ProteinEmbeddings, ResidueEmbeddings> load_precomputed(
    const Family& family, const std::filesystem::path& protein_file,
    const std::filesystem::path& residue_file) {
  return {load_protein_sidecar(family, protein_file), load_residue_sidecar(family, residue_file)};
}

}  // namespace evolmpnn
