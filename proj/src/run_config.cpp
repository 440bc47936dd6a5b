#include "evolmpnn/run_config.hpp"

#include <fstream>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

namespace {

std::filesystem::path resolve(const nlohmann::json& v, const std::filesystem::path& base, const char* key) {
  if (!v.is_string()) throw ValidationError(std::string("data.") + key + " must be a path string");
  std::filesystem::path p = v.get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  RunConfig c;
  bool has_data = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "model") c.model = model_config_from_json(v);
    else if (key == "train") c.train = train_config_from_json(v);
    else if (key == "data") has_data = true;
    else throw ValidationError("unknown key '" + key + "' in run config");
  }
  if (!has_data) throw ValidationError("run config has no data section");
  const auto& d = j.at("data");
  if (!d.is_object()) throw ValidationError("data must be a JSON object");
  for (const auto& [key, v] : d.items()) {
    if (key == "family") c.data.family = resolve(v, base_dir, "family");
    else if (key == "split") c.data.split = resolve(v, base_dir, "split");
    else if (key == "protein_sidecar") c.data.protein_sidecar = resolve(v, base_dir, "protein_sidecar");
    else if (key == "residue_sidecar") c.data.residue_sidecar = resolve(v, base_dir, "residue_sidecar");
    else if (key == "knn_k") {
      if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) throw ValidationError("data.knn_k must be a positive integer");
      c.data.knn_k = v.get<std::size_t>();
    } else {
      throw ValidationError("unknown key '" + key + "' in data");
    }
  }
  if (c.data.family.empty()) throw ValidationError("data.family is required");
  if (c.data.split.empty()) throw ValidationError("data.split is required");
  if (c.data.knn_k) c.model.knn_k = *c.data.knn_k;
  if (c.model.residue_mode == ResidueMode::Sidecar && !c.data.residue_sidecar)
    throw ValidationError("residue_mode sidecar needs data.residue_sidecar");
  if (c.model.protein_mode == ProteinMode::Sidecar && !c.data.protein_sidecar)
    throw ValidationError("protein_mode sidecar needs data.protein_sidecar");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json data{{"family", std::filesystem::absolute(c.data.family).string()},
                      {"split", std::filesystem::absolute(c.data.split).string()}};
  if (c.data.protein_sidecar) data["protein_sidecar"] = std::filesystem::absolute(*c.data.protein_sidecar).string();
  if (c.data.residue_sidecar) data["residue_sidecar"] = std::filesystem::absolute(*c.data.residue_sidecar).string();
  if (c.data.knn_k) data["knn_k"] = *c.data.knn_k;
  return {{"model", to_json(c.model)}, {"train", to_json(c.train)}, {"data", data}};
}

}  // namespace evolmpnn
