#include "evolmpnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "tensors.bin";

std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model, std::size_t length,
                     const nlohmann::json& run_config) {
  std::filesystem::create_directories(dir);
  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  model.params.visit([&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"dtype", "float32"}, {"offset", blob.size()}});
    for (double v : m.values()) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int s = 0; s < 32; s += 8) blob.push_back(static_cast<char>((bits >> s) & 0xffu));
    }
  });
  nlohmann::json manifest{{"format_version", kCheckpointVersion},
                          {"config", run_config},
                          {"model", to_json(model.config)},
                          {"length", length},
                          {"target_scaler", to_json(model.scaler)},
                          {"tensors", tensors},
                          {"blob", {{"file", kBlob}, {"bytes", blob.size()}}},
                          {"checksum", {{"algorithm", "crc32"}, {"value", crc32_of(blob)}}}};
  {
    std::ofstream out(dir / kBlob, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir / kBlob).string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(dir / kManifest);
  if (!out) throw ValidationError("cannot write " + (dir / kManifest).string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ck;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw ValidationError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    const std::string blob = read_file(dir / kBlob);
    const auto expected = manifest.at("checksum").at("value").get<std::uint32_t>();
    if (crc32_of(blob) != expected) throw ValidationError("checkpoint checksum mismatch");
    if (blob.size() != manifest.at("blob").at("bytes").get<std::size_t>())
      throw ValidationError("checkpoint blob size does not match the manifest");

    ck.run_config = manifest.at("config");
    ck.length = manifest.at("length").get<std::size_t>();
    ck.model.config = model_config_from_json(manifest.at("model"));
    ck.model.scaler = target_scaler_from_json(manifest.at("target_scaler"));
    ck.model.params = init_params(ck.model.config, ck.length, 0);

    const auto& entries = manifest.at("tensors");
    std::size_t k = 0;
    ck.model.params.visit([&](const std::string& name, Matrix& m) {
      if (k >= entries.size()) throw ValidationError("checkpoint is missing tensor '" + name + "'");
      const auto& e = entries[k++];
      if (e.at("name").get<std::string>() != name)
        throw ValidationError("checkpoint tensor '" + e.at("name").get<std::string>() + "' found where '" + name +
                              "' was expected");
      const auto shape = e.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
        throw ValidationError("checkpoint tensor '" + name + "' has the wrong shape");
      if (e.at("dtype").get<std::string>() != "float32")
        throw ValidationError("checkpoint tensor '" + name + "' is not float32");
      const std::size_t offset = e.at("offset").get<std::size_t>();
      if (offset + 4 * m.size() > blob.size())
        throw ValidationError("checkpoint tensor '" + name + "' runs past the end of the blob");
      const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        m.values()[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
    });
    if (k != entries.size()) throw ValidationError("checkpoint holds unexpected extra tensors");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  return ck;
}

}  // namespace evolmpnn
