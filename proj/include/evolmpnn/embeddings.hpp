#pragma once

#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evolmpnn/family.hpp"
#include "evolmpnn/matrix.hpp"

namespace evolmpnn {

/// Per-residue embeddings for M proteins, shape M x N x d, row-major.
struct ResidueEmbeddings {
  std::size_t proteins = 0;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  ResidueEmbeddings() = default;
  ResidueEmbeddings(std::size_t m, std::size_t n, std::size_t d)
      : proteins(m), length(n), dim(d), values(m * n * d, 0.0) {}

  /// N x d slice of protein i.
  Matrix protein(std::size_t i) const;
  void set_protein(std::size_t i, const Matrix& r);
};

/// Per-protein embeddings, one row per protein (M x d).
struct ProteinEmbeddings {
  Matrix values;
};

enum class ResidueMode { OneHot, Sidecar };
enum class ProteinMode { OneHotMean, Sidecar };

/// Indicator of each residue pushed through a shared 20 x d projection.
ResidueEmbeddings onehot_residues(const Family& family, const Matrix& projection);

/// Elementwise product of every protein's N x d block with the positional table.
ResidueEmbeddings apply_positional(const ResidueEmbeddings& x, const Matrix& positional);

/// Positional table drawn i.i.d. from N(1, std).
Matrix init_positional(std::size_t length, std::size_t dim, std::mt19937_64& rng,
                       double std = 0.02);

/// Residue composition of each protein (M x 20, rows sum to 1).
Matrix residue_composition(const Family& family);

/// H for every protein: the residue-composition mean through `projection` (OneHotMean),
/// or the supplied sidecar table (Sidecar), checked against `dim`.
ProteinEmbeddings init_protein_embeddings(const Family& family, ProteinMode mode, std::size_t dim,
                                          const Matrix* projection,
                                          const ProteinEmbeddings* sidecar = nullptr);

// Sidecar files: little-endian, 16-byte header ("EVSC", u32 count, u32 dim, u32 reserved),
// then per record a u16 id length, the id bytes and the float32 payload. A JSON variant
// {"dim": d, "records": [{"id": ..., "data": base64(float32 LE)}]} is also accepted.

struct SidecarTable {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<float>> payloads;
};

/// Each record carries rows_per_record * dim floats (1 for protein files, N for residue files).
SidecarTable read_sidecar(const std::filesystem::path& path, std::size_t rows_per_record);
void write_sidecar(const std::filesystem::path& path, const SidecarTable& table);
void write_sidecar_json(const std::filesystem::path& path, const SidecarTable& table);

ProteinEmbeddings load_protein_sidecar(const Family& family, const std::filesystem::path& path);
ResidueEmbeddings load_residue_sidecar(const Family& family, const std::filesystem::path& path);
std::pair<ProteinEmbeddings, ResidueEmbeddings> load_precomputed(
    const Family& family, const std::filesystem::path& protein_file,
    const std::filesystem::path& residue_file);

}  // namespace evolmpnn
