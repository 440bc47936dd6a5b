#include "evolmpnn/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "evolmpnn/anchors.hpp"
#include "evolmpnn/error.hpp"
#include "evolmpnn/evaluation.hpp"

namespace evolmpnn {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("train.lr must be a finite value >= 0");
  if (epochs == 0) throw ValidationError("train.epochs must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("train.beta1 and train.beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ValidationError("train.eps must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"seed", c.seed},
          {"standardize_targets", c.standardize_targets},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"resample_anchors_per_step", c.resample_anchors_per_step},
          {"track_train_spearman", c.track_train_spearman}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("train must be a JSON object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lr") c.lr = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "standardize_targets") c.standardize_targets = v.get<bool>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "resample_anchors_per_step") c.resample_anchors_per_step = v.get<bool>();
      else if (key == "track_train_spearman") c.track_train_spearman = v.get<bool>();
      else throw ValidationError("unknown key '" + key + "' in train");
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("bad value for train." + key);
    }
  }
  c.validate();
  return c;
}

Matrix TargetScaler::apply(const Matrix& y) const {
  Matrix out = y;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) = (y(i, j) - mean[j]) / std[j];
  return out;
}

Matrix TargetScaler::invert(const Matrix& y) const {
  Matrix out = y;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) = y(i, j) * std[j] + mean[j];
  return out;
}

nlohmann::json to_json(const TargetScaler& s) { return {{"mean", s.mean}, {"std", s.std}}; }

TargetScaler target_scaler_from_json(const nlohmann::json& j) {
  TargetScaler s;
  try {
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("malformed target scaler");
  }
  if (s.mean.size() != s.std.size()) throw ValidationError("target scaler mean/std lengths differ");
  return s;
}

std::pair<Matrix, TargetScaler> standardize_targets(const Matrix& y_train, const Matrix& y_all) {
  if (y_train.rows() == 0) throw ValidationError("no training targets to standardize");
  if (y_train.cols() != y_all.cols()) throw ValidationError("target widths differ");
  TargetScaler s;
  const double n = static_cast<double>(y_train.rows());
  for (std::size_t j = 0; j < y_train.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < y_train.rows(); ++i) mean += y_train(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < y_train.rows(); ++i) var += (y_train(i, j) - mean) * (y_train(i, j) - mean);
    const double sd = std::sqrt(var / n);
    s.mean.push_back(mean);
    s.std.push_back(sd > 0.0 ? sd : 1.0);
  }
  return {s.apply(y_all), s};
}

bool same_outcome(const TrainReport& a, const TrainReport& b) {
  if (a.best_epoch != b.best_epoch || a.best_valid_spearman != b.best_valid_spearman) return false;
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto& x = a.epochs[i];
    const auto& y = b.epochs[i];
    if (x.epoch != y.epoch || x.train_loss != y.train_loss || x.valid_spearman != y.valid_spearman ||
        x.train_spearman != y.train_spearman)
      return false;
  }
  return true;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"valid_spearman", nullptr}, {"wall_s", r.wall_s}};
  if (r.valid_spearman) j["valid_spearman"] = *r.valid_spearman;
  if (r.train_spearman) j["train_spearman"] = *r.train_spearman;
  return j;
}

void write_train_log(std::ostream& out, const TrainReport& report) {
  for (const auto& r : report.epochs) out << to_json(r).dump() << '\n';
}

std::uint64_t evaluation_anchor_seed(const ModelConfig& config) { return config.anchors.seed; }

Matrix predict(const TrainedModel& model, const ModelInputs& inputs, std::span<const std::size_t> rows) {
  const Prediction p = forward(inputs, model.params, model.config, rows, evaluation_anchor_seed(model.config));
  return model.scaler.invert(p.y);
}

void round_to_float(ModelParams& params) {
  params.visit([](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  });
}

namespace {

struct Adam {
  ModelParams m, v;
  std::size_t step = 0;

  explicit Adam(const ModelParams& p) : m(zeros_like(p)), v(zeros_like(p)) {}

  void update(ModelParams& params, const ModelParams& grad, const TrainConfig& c) {
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    std::vector<Matrix*> w, g, mm, vv;
    params.visit([&](const std::string&, Matrix& x) { w.push_back(&x); });
    const_cast<ModelParams&>(grad).visit([&](const std::string&, Matrix& x) { g.push_back(&x); });
    m.visit([&](const std::string&, Matrix& x) { mm.push_back(&x); });
    v.visit([&](const std::string&, Matrix& x) { vv.push_back(&x); });
    for (std::size_t t = 0; t < w.size(); ++t) {
      auto wv = w[t]->values();
      auto gv = g[t]->values();
      auto mv = mm[t]->values();
      auto sv = vv[t]->values();
      for (std::size_t i = 0; i < wv.size(); ++i) {
        mv[i] = c.beta1 * mv[i] + (1.0 - c.beta1) * gv[i];
        sv[i] = c.beta2 * sv[i] + (1.0 - c.beta2) * gv[i] * gv[i];
        wv[i] -= c.lr * (mv[i] / bc1) / (std::sqrt(sv[i] / bc2) + c.eps);
      }
    }
  }
};

std::optional<double> column_mean_spearman(const Matrix& pred, const Matrix& target) {
  double total = 0.0;
  for (std::size_t j = 0; j < pred.cols(); ++j) {
    std::vector<double> a(pred.rows()), b(pred.rows());
    for (std::size_t i = 0; i < pred.rows(); ++i) {
      a[i] = pred(i, j);
      b[i] = target(i, j);
    }
    const auto rho = try_spearman(a, b);
    if (!rho) return std::nullopt;
    total += *rho;
  }
  return total / static_cast<double>(pred.cols());
}

Matrix rows_of(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace

TrainResult train(const Family& family, const SplitAssignment& split, const ModelConfig& model_config,
                  const TrainConfig& tc, const ResidueEmbeddings* residue_sidecar,
                  const ProteinEmbeddings* protein_sidecar, std::ostream* log) {
  tc.validate();
  ModelConfig config = model_config;
  config.target_dim = family.target_dim();
  config.validate();

  const std::vector<std::size_t> train_rows = split.rows(SplitTag::Train);
  const std::vector<std::size_t> valid_rows = split.rows(SplitTag::Valid);
  if (train_rows.empty()) throw ValidationError("training split is empty");
  if (valid_rows.empty()) throw ValidationError("validation split is empty");

  const Matrix raw = target_matrix(family);
  TrainedModel model;
  model.config = config;
  Matrix targets = raw;
  if (tc.standardize_targets) {
    auto [scaled, scaler] = standardize_targets(rows_of(raw, train_rows), raw);
    targets = std::move(scaled);
    model.scaler = std::move(scaler);
  } else {
    model.scaler.mean.assign(raw.cols(), 0.0);
    model.scaler.std.assign(raw.cols(), 1.0);
  }

  const ModelInputs inputs = make_inputs(family, split, config, residue_sidecar, protein_sidecar);
  model.params = init_params(config, family.length(), tc.seed);
  const Matrix valid_targets = rows_of(raw, valid_rows);
  const Matrix train_targets = rows_of(raw, train_rows);
  const std::uint64_t eval_seed = evaluation_anchor_seed(config);

  Adam adam(model.params);
  std::mt19937_64 rng(mix64(tc.seed ^ 0x5eedULL));
  const std::size_t batch =
      tc.batch_size == 0 || tc.batch_size >= train_rows.size() ? train_rows.size() : tc.batch_size;

  TrainResult result;
  ModelParams best = model.params;
  bool have_best = false;
  std::size_t since_best = 0;
  std::vector<std::size_t> order = train_rows;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (batch < order.size()) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t b = 0;
    for (std::size_t first = 0; first < order.size(); first += batch, ++b) {
      const std::span<const std::size_t> rows(order.data() + first, std::min(batch, order.size() - first));
      const std::uint64_t anchor_seed =
          tc.resample_anchors_per_step ? mix64(tc.seed ^ mix64((epoch << 32) ^ b)) : eval_seed;
      const std::string where = " at epoch " + std::to_string(epoch) + " batch " + std::to_string(b);
      ModelParams grad = zeros_like(model.params);
      double loss = 0.0;
      try {
        loss = loss_and_grad(inputs, model.params, config, rows, targets, anchor_seed, grad);
      } catch (const NumericError& e) {
        throw NumericError("training diverged" + where + ": " + e.what());
      }
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss" + where);
      loss_sum += loss * static_cast<double>(rows.size());
      adam.update(model.params, grad, tc);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.valid_spearman = column_mean_spearman(predict(model, inputs, valid_rows), valid_targets);
    if (tc.track_train_spearman)
      rec.train_spearman = column_mean_spearman(predict(model, inputs, train_rows), train_targets);
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const bool improved = rec.valid_spearman &&
                          (!result.report.best_valid_spearman || *rec.valid_spearman > *result.report.best_valid_spearman);
    if (!have_best || improved) {
      best = model.params;
      result.report.best_epoch = epoch;
      if (rec.valid_spearman) result.report.best_valid_spearman = rec.valid_spearman;
      have_best = true;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.report.epochs.push_back(rec);
    if (log != nullptr) *log << to_json(rec).dump() << std::endl;
    if (tc.patience > 0 && since_best >= tc.patience) break;
  }

  model.params = std::move(best);
  round_to_float(model.params);
  result.model = std::move(model);
  return result;
}

}  // namespace evolmpnn
