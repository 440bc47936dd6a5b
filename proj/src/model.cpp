#include "evolmpnn/model.hpp"

#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "evolmpnn/error.hpp"
#include "evolmpnn/parallel.hpp"

namespace evolmpnn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::EvolMPNN: return "evolmpnn";
    case Variant::EvolGNN: return "evolgnn";
    case Variant::EvolFormer: return "evolformer";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "evolmpnn") return Variant::EvolMPNN;
  if (s == "evolgnn") return Variant::EvolGNN;
  if (s == "evolformer") return Variant::EvolFormer;
  throw ValidationError("unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(ResidueMode m) { return m == ResidueMode::OneHot ? "onehot" : "sidecar"; }

ResidueMode parse_residue_mode(std::string_view s) {
  if (s == "onehot") return ResidueMode::OneHot;
  if (s == "sidecar") return ResidueMode::Sidecar;
  throw ValidationError("unknown residue mode '" + std::string(s) + "'");
}

std::string_view to_string(ProteinMode m) {
  return m == ProteinMode::OneHotMean ? "onehot-mean" : "sidecar";
}

ProteinMode parse_protein_mode(std::string_view s) {
  if (s == "onehot-mean") return ProteinMode::OneHotMean;
  if (s == "sidecar") return ProteinMode::Sidecar;
  throw ValidationError("unknown protein mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("model.") + name + " must be positive");
  };
  positive(d, "d");
  positive(heads, "heads");
  positive(residue_layers, "residue_layers");
  positive(evolution_layers, "evolution_layers");
  positive(target_dim, "target_dim");
  if (variant == Variant::EvolGNN) positive(knn_k, "knn_k");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"d", c.d},
          {"heads", c.heads},
          {"head_dim", c.head_dim},
          {"ffn_dim", c.ffn_dim},
          {"residue_layers", c.residue_layers},
          {"evolution_layers", c.evolution_layers},
          {"target_dim", c.target_dim},
          {"anchors", {{"k", c.anchors.k}, {"seed", c.anchors.seed}, {"resample", c.anchors.resample}}},
          {"knn_k", c.knn_k},
          {"residue_mode", to_string(c.residue_mode)},
          {"protein_mode", to_string(c.protein_mode)}};
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                    const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("bad value for " + where + "." + key);
  }
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"variant", "d", "heads", "head_dim", "ffn_dim", "residue_layers", "evolution_layers",
                  "target_dim", "anchors", "knn_k", "residue_mode", "protein_mode"},
                 "model");
  ModelConfig c;
  std::string s;
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  read(j, "d", c.d, "model");
  read(j, "heads", c.heads, "model");
  read(j, "head_dim", c.head_dim, "model");
  read(j, "ffn_dim", c.ffn_dim, "model");
  read(j, "residue_layers", c.residue_layers, "model");
  read(j, "evolution_layers", c.evolution_layers, "model");
  read(j, "target_dim", c.target_dim, "model");
  read(j, "knn_k", c.knn_k, "model");
  if (j.contains("anchors")) {
    const auto& a = j.at("anchors");
    reject_unknown(a, {"k", "seed", "resample"}, "model.anchors");
    read(a, "k", c.anchors.k, "model.anchors");
    read(a, "seed", c.anchors.seed, "model.anchors");
    read(a, "resample", c.anchors.resample, "model.anchors");
  }
  if (j.contains("residue_mode")) c.residue_mode = parse_residue_mode(j.at("residue_mode").get<std::string>());
  if (j.contains("protein_mode")) c.protein_mode = parse_protein_mode(j.at("protein_mode").get<std::string>());
  c.validate();
  return c;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(rows + cols)));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::size_t length, std::uint64_t seed) {
  config.validate();
  if (length == 0) throw ValidationError("sequence length must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t d = config.d;
  ModelParams p;
  if (config.residue_mode == ResidueMode::OneHot) p.residue_projection = glorot(kAlphabetSize, d, rng);
  if (config.protein_mode == ProteinMode::OneHotMean) p.protein_projection = glorot(kAlphabetSize, d, rng);
  p.positional = init_positional(length, d, rng);
  for (std::size_t l = 0; l < config.residue_layers; ++l)
    p.residue_layers.push_back(
        init_attention_layer(d, config.heads, config.resolved_head_dim(), config.resolved_ffn_dim(), rng));
  for (std::size_t l = 0; l < config.evolution_layers; ++l) {
    EvolutionLayerParams e;
    switch (config.variant) {
      case Variant::EvolMPNN:
        e.combine = glorot(2 * d, d, rng);
        break;
      case Variant::EvolGNN:
        e.combine = glorot(2 * d, d, rng);
        e.neighbor = glorot(d, d, rng);
        e.gate = glorot(d, d, rng);
        break;
      case Variant::EvolFormer:
        e.attention = init_attention_layer(d, config.heads, config.resolved_head_dim(),
                                           config.resolved_ffn_dim(), rng);
        e.bias_projection = glorot(d, d, rng);
        break;
    }
    p.evolution_layers.push_back(std::move(e));
  }
  p.head = glorot(2 * d, config.target_dim, rng);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.visit([](const std::string&, Matrix& m) { m.fill(0.0); });
  return z;
}

namespace {

std::vector<Matrix*> tensors(ModelParams& p) {
  std::vector<Matrix*> out;
  p.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

void axpy(ModelParams& a, double s, const ModelParams& b) {
  auto ta = tensors(a);
  auto tb = tensors(const_cast<ModelParams&>(b));
  if (ta.size() != tb.size()) throw ValidationError("parameter sets differ in structure");
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (!ta[k]->same_shape(*tb[k])) throw ValidationError("parameter shapes differ");
    auto va = ta[k]->values();
    auto vb = tb[k]->values();
    for (std::size_t i = 0; i < va.size(); ++i) va[i] += s * vb[i];
  }
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  auto ta = tensors(const_cast<ModelParams&>(a));
  auto tb = tensors(const_cast<ModelParams&>(b));
  if (ta.size() != tb.size()) return false;
  for (std::size_t k = 0; k < ta.size(); ++k)
    if (!(*ta[k] == *tb[k])) return false;
  return true;
}

ModelInputs make_inputs(const Family& family, const SplitAssignment& split, const ModelConfig& config,
                        const ResidueEmbeddings* residue_sidecar,
                        const ProteinEmbeddings* protein_sidecar) {
  if (split.tags.size() != family.size()) throw ValidationError("split does not match the family");
  ModelInputs in;
  in.family = &family;
  in.residue_sidecar = residue_sidecar;
  in.protein_sidecar = protein_sidecar;
  for (std::size_t i : split.rows(SplitTag::Train)) in.anchor_pool.push_back(family.record(i).id);
  if (in.anchor_pool.empty()) throw ValidationError("split has no training proteins");
  in.fallback_id = family.wild_type().id;
  if (config.variant == Variant::EvolGNN)
    in.graph = std::make_shared<const Graph>(knn_graph(family, config.knn_k));
  return in;
}

Matrix target_matrix(const Family& family) {
  Matrix y(family.size(), family.target_dim());
  for (std::size_t i = 0; i < family.size(); ++i)
    for (std::size_t j = 0; j < family.target_dim(); ++j) y(i, j) = family.record(i).target[j];
  return y;
}

std::vector<AnchorGroups> resolve_anchors(const ModelInputs& inputs, const ModelConfig& config,
                                          std::uint64_t anchor_seed) {
  AnchorPolicy policy = config.anchors;
  policy.seed = anchor_seed;
  std::vector<AnchorGroups> layers;
  for (std::size_t l = 0; l < config.evolution_layers; ++l) {
    AnchorGroups groups;
    for (const AnchorSet& s : sample_anchor_sets(inputs.anchor_pool, policy, l, inputs.fallback_id)) {
      std::vector<std::size_t> rows;
      rows.reserve(s.member_ids.size());
      for (const auto& id : s.member_ids) {
        const auto r = inputs.family->index_of(id);
        if (!r) throw ValidationError("anchor id '" + id + "' is not in the family");
        rows.push_back(*r);
      }
      groups.push_back(std::move(rows));
    }
    layers.push_back(std::move(groups));
  }
  return layers;
}

namespace {

constexpr std::size_t kChunk = 16;

void check_inputs(const ModelInputs& in, const ModelParams& p, const ModelConfig& c) {
  if (in.family == nullptr) throw ValidationError("model inputs carry no family");
  const Family& f = *in.family;
  if (p.positional.rows() != f.length() || p.positional.cols() != c.d)
    throw ValidationError("positional table does not match sequence length and d");
  if (p.head.rows() != 2 * c.d || p.head.cols() != f.target_dim())
    throw ValidationError("head shape does not match 2d x target dimension");
  if (c.residue_mode == ResidueMode::Sidecar) {
    const ResidueEmbeddings* r = in.residue_sidecar;
    if (r == nullptr) throw ValidationError("residue sidecar embeddings are missing");
    if (r->proteins != f.size() || r->length != f.length() || r->dim != c.d)
      throw ValidationError("residue sidecar shape does not match M x N x d");
  }
  if (c.protein_mode == ProteinMode::Sidecar) {
    const ProteinEmbeddings* h = in.protein_sidecar;
    if (h == nullptr) throw ValidationError("protein sidecar embeddings are missing");
    if (h->values.rows() != f.size() || h->values.cols() != c.d)
      throw ValidationError("protein sidecar shape does not match M x d");
  }
  if (c.variant == Variant::EvolGNN && (!in.graph || in.graph->nodes() != f.size()))
    throw ValidationError("evolgnn needs a graph over the whole family");
}

// Encoder weights bound on a per-protein tape.
struct EncoderVars {
  ad::Var residue_projection;
  ad::Var positional;
  std::vector<AttentionLayerVars> layers;
};

EncoderVars bind_encoder(ad::Tape& t, const ModelParams& p, ModelParams* sink) {
  EncoderVars v;
  if (!p.residue_projection.empty())
    v.residue_projection = t.parameter(p.residue_projection, sink ? &sink->residue_projection : nullptr);
  v.positional = t.parameter(p.positional, sink ? &sink->positional : nullptr);
  for (std::size_t l = 0; l < p.residue_layers.size(); ++l)
    v.layers.push_back(bind(t, p.residue_layers[l], sink ? &sink->residue_layers[l] : nullptr));
  return v;
}

// Position-mean of protein `row`'s final residue embeddings (1 x d).
ad::Var encode_protein(ad::Tape& t, const EncoderVars& v, const ModelInputs& in, std::size_t row) {
  ad::Var x;
  if (v.residue_projection.valid()) {
    const auto& enc = in.family->encoded(row);
    const std::vector<std::size_t> idx(enc.begin(), enc.end());
    x = ad::gather_rows(v.residue_projection, idx);
  } else {
    x = t.constant(in.residue_sidecar->protein(row));
  }
  x = ad::mul(x, v.positional);
  for (std::size_t l = 0; l < v.layers.size(); ++l) x = attention_layer(x, v.layers[l], l);
  return ad::mean_rows(x);
}

// Encoder-only gradient buffer.
ModelParams encoder_zeros(const ModelParams& p) {
  ModelParams z;
  if (!p.residue_projection.empty()) z.residue_projection = Matrix(p.residue_projection.rows(), p.residue_projection.cols());
  z.positional = Matrix(p.positional.rows(), p.positional.cols());
  for (const auto& l : p.residue_layers) z.residue_layers.push_back(zeros_like(l));
  return z;
}

void add_encoder(ModelParams& into, const ModelParams& g) {
  if (!into.residue_projection.empty()) into.residue_projection += g.residue_projection;
  into.positional += g.positional;
  for (std::size_t l = 0; l < into.residue_layers.size(); ++l) {
    auto& a = into.residue_layers[l];
    const auto& b = g.residue_layers[l];
    for (std::size_t h = 0; h < a.heads(); ++h) {
      a.query[h] += b.query[h];
      a.key[h] += b.key[h];
      a.value[h] += b.value[h];
      a.output[h] += b.output[h];
    }
    a.ffn_in += b.ffn_in;
    a.ffn_out += b.ffn_out;
    a.norm_gain += b.norm_gain;
    a.norm_bias += b.norm_bias;
  }
}

Matrix pooled_values(const ModelInputs& in, const ModelParams& p, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), p.positional.cols());
  parallel_for(rows.size(), [&](std::size_t i) {
    ad::Tape t;
    const EncoderVars v = bind_encoder(t, p, nullptr);
    const Matrix r = encode_protein(t, v, in, rows[i]).value();
    std::copy(r.values().begin(), r.values().end(), out.row(i).begin());
  });
  return out;
}

// Block node: rows of pooled residue embeddings. Backward re-runs each protein's encoder on
// its own tape and reduces the weight gradients chunk by chunk in a fixed order.
ad::Var pooled_residues(ad::Tape& t, const ModelInputs& in, const ModelParams& p,
                        const std::vector<std::size_t>& rows, ModelParams* grad) {
  Matrix value = pooled_values(in, p, rows);
  if (!all_finite(value)) throw NumericError("non-finite activation in residue encoder");
  return t.record(std::move(value), grad != nullptr,
                  [&in, &p, rows, grad](ad::Tape&, const Matrix& g, const Matrix&) {
                    const std::size_t chunks = (rows.size() + kChunk - 1) / kChunk;
                    std::vector<ModelParams> partial(chunks);
                    parallel_for(chunks, [&](std::size_t c) {
                      ModelParams local = encoder_zeros(p);
                      const std::size_t last = std::min(rows.size(), (c + 1) * kChunk);
                      for (std::size_t i = c * kChunk; i < last; ++i) {
                        ad::Tape sub;
                        const EncoderVars v = bind_encoder(sub, p, &local);
                        const ad::Var out = encode_protein(sub, v, in, rows[i]);
                        sub.backward(out, row_slice(g, i, 1));
                      }
                      partial[c] = std::move(local);
                    });
                    for (const auto& part : partial) add_encoder(*grad, part);
                  });
}

struct Plan {
  std::vector<std::size_t> working;              // family rows computed
  std::vector<std::size_t> output;               // positions in `working` of the requested rows
  std::vector<AnchorGroups> groups;              // per layer, positions in `working`
};

Plan make_plan(const ModelInputs& in, const ModelConfig& c, std::span<const std::size_t> rows,
               std::uint64_t anchor_seed) {
  const std::size_t m = in.family->size();
  for (std::size_t r : rows)
    if (r >= m) throw ValidationError("protein row out of range");
  Plan plan;
  if (c.variant != Variant::EvolMPNN) {
    plan.working.resize(m);
    for (std::size_t i = 0; i < m; ++i) plan.working[i] = i;
    plan.output.assign(rows.begin(), rows.end());
    return plan;
  }
  const std::vector<AnchorGroups> anchors = resolve_anchors(in, c, anchor_seed);
  std::unordered_map<std::size_t, std::size_t> position;
  auto place = [&](std::size_t r) {
    const auto [it, fresh] = position.emplace(r, plan.working.size());
    if (fresh) plan.working.push_back(r);
    return it->second;
  };
  for (std::size_t r : rows) plan.output.push_back(place(r));
  std::vector<std::size_t> members;
  for (const auto& layer : anchors)
    for (const auto& g : layer) members.insert(members.end(), g.begin(), g.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  for (std::size_t r : members) place(r);
  for (const auto& layer : anchors) {
    AnchorGroups mapped;
    for (const auto& g : layer) {
      std::vector<std::size_t> pos;
      for (std::size_t r : g) pos.push_back(position.at(r));
      mapped.push_back(std::move(pos));
    }
    plan.groups.push_back(std::move(mapped));
  }
  return plan;
}

struct Built {
  ad::Var y;  // requested rows x theta
  ad::Var z;
  ad::Var z_protein;
  ad::Var z_residue;
};

Built build(ad::Tape& t, const ModelInputs& in, const ModelParams& p, const ModelConfig& c,
            std::span<const std::size_t> rows, std::uint64_t anchor_seed, ModelParams* grad) {
  check_inputs(in, p, c);
  const Plan plan = make_plan(in, c, rows, anchor_seed);
  const Family& f = *in.family;

  const ad::Var pooled = pooled_residues(t, in, p, plan.working, grad);

  ad::Var h;
  if (c.protein_mode == ProteinMode::OneHotMean) {
    Matrix comp(plan.working.size(), kAlphabetSize);
    const double w = 1.0 / static_cast<double>(f.length());
    for (std::size_t i = 0; i < plan.working.size(); ++i)
      for (std::uint8_t a : f.encoded(plan.working[i])) comp(i, a) += w;
    h = ad::matmul(t.constant(std::move(comp)),
                   t.parameter(p.protein_projection, grad ? &grad->protein_projection : nullptr));
  } else {
    Matrix h0(plan.working.size(), c.d);
    for (std::size_t i = 0; i < plan.working.size(); ++i) {
      const auto src = in.protein_sidecar->values.row(plan.working[i]);
      std::copy(src.begin(), src.end(), h0.row(i).begin());
    }
    h = t.constant(std::move(h0));
  }

  ad::SparseRows adjacency;
  if (c.variant == Variant::EvolGNN) adjacency = adjacency_rows(*in.graph);
  for (std::size_t l = 0; l < p.evolution_layers.size(); ++l) {
    const EvolutionLayerVars v =
        bind(t, p.evolution_layers[l], grad ? &grad->evolution_layers[l] : nullptr);
    switch (c.variant) {
      case Variant::EvolMPNN: h = evolmpnn_layer(h, pooled, plan.groups[l], v); break;
      case Variant::EvolGNN: h = evolgnn_layer(h, pooled, adjacency, v); break;
      case Variant::EvolFormer: h = evolformer_layer(h, pooled, v, l); break;
    }
    if (!all_finite(h.value()))
      throw NumericError("non-finite activation in evolution layer " + std::to_string(l));
  }

  Built b;
  b.z_protein = ad::gather_rows(h, plan.output);
  b.z_residue = ad::gather_rows(pooled, plan.output);
  b.z = ad::concat_cols(b.z_protein, b.z_residue);
  b.y = ad::matmul(b.z, t.parameter(p.head, grad ? &grad->head : nullptr));
  if (!all_finite(b.y.value())) throw NumericError("non-finite activation in prediction head");
  return b;
}

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

double loss_impl(const ModelInputs& in, const ModelParams& p, const ModelConfig& c,
                 std::span<const std::size_t> rows, const Matrix& targets, std::uint64_t anchor_seed,
                 ModelParams* grad) {
  if (rows.empty()) throw ValidationError("loss over an empty row mask");
  if (targets.rows() != in.family->size()) throw ValidationError("targets do not cover the family");
  ad::Tape t;
  const Built b = build(t, in, p, c, rows, anchor_seed, grad);
  std::vector<std::size_t> all(rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const ad::Var loss = ad::mse(b.y, gather(targets, rows), all);
  if (grad != nullptr) t.backward(loss);
  return loss.value()(0, 0);
}

}  // namespace

Prediction forward(const ModelInputs& inputs, const ModelParams& params, const ModelConfig& config,
                   std::span<const std::size_t> rows, std::uint64_t anchor_seed) {
  Prediction out;
  out.rows.assign(rows.begin(), rows.end());
  if (rows.empty()) {
    out.y = Matrix(0, params.head.cols());
    return out;
  }
  ad::Tape t;
  const Built b = build(t, inputs, params, config, rows, anchor_seed, nullptr);
  out.y = b.y.value();
  out.z = b.z.value();
  out.z_protein = b.z_protein.value();
  out.z_residue = b.z_residue.value();
  return out;
}

double mse_loss(const Matrix& pred, const Matrix& target, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ValidationError("mse over an empty row mask");
  if (!pred.same_shape(target)) throw ValidationError("prediction and target shapes differ");
  double sum = 0.0;
  for (std::size_t r : rows) {
    if (r >= pred.rows()) throw ValidationError("mse row out of range");
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      const double e = pred(r, j) - target(r, j);
      sum += e * e;
    }
  }
  return sum / static_cast<double>(rows.size() * pred.cols());
}

double loss_and_grad(const ModelInputs& inputs, const ModelParams& params, const ModelConfig& config,
                     std::span<const std::size_t> rows, const Matrix& targets,
                     std::uint64_t anchor_seed, ModelParams& grad) {
  return loss_impl(inputs, params, config, rows, targets, anchor_seed, &grad);
}

GradientCheckReport gradient_check(const ModelInputs& inputs, const ModelParams& params,
                                   const ModelConfig& config, std::span<const std::size_t> rows,
                                   const Matrix& targets, std::uint64_t anchor_seed,
                                   const GradientCheckOptions& options) {
  ModelParams grad = zeros_like(params);
  loss_impl(inputs, params, config, rows, targets, anchor_seed, &grad);

  ModelParams probe = params;
  std::vector<std::pair<std::string, Matrix*>> probe_tensors;
  probe.visit([&](const std::string& name, Matrix& m) { probe_tensors.emplace_back(name, &m); });
  std::vector<const Matrix*> grad_tensors;
  grad.visit([&](const std::string&, const Matrix& m) { grad_tensors.push_back(&m); });

  std::mt19937_64 rng(options.seed);
  GradientCheckReport report;
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    const auto& [name, tensor] = probe_tensors[k];
    if (options.include && !options.include(name)) continue;
    std::vector<std::size_t> coords(tensor->size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > options.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_tensor);
    }
    TensorCheck check{name, coords.size(), 0.0};
    for (std::size_t idx : coords) {
      double& w = tensor->values()[idx];
      const double saved = w;
      w = saved + options.eps;
      const double up = loss_impl(inputs, probe, config, rows, targets, anchor_seed, nullptr);
      w = saved - options.eps;
      const double down = loss_impl(inputs, probe, config, rows, targets, anchor_seed, nullptr);
      w = saved;
      const double fd = (up - down) / (2.0 * options.eps);
      const double an = grad_tensors[k]->values()[idx];
      const double denom = std::max({std::abs(an), std::abs(fd), options.floor});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(an - fd) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  return report;
}

}  // namespace evolmpnn
