// Acceptance checks A1-A9. With no arguments every check runs; otherwise only the named
// ones (e.g. `acceptance A1 A5`). Prints one PASS/FAIL line per check and exits non-zero
// when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evolmpnn/anchors.hpp"
#include "evolmpnn/checkpoint.hpp"
#include "evolmpnn/evaluation.hpp"
#include "evolmpnn/landscape.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace evolmpnn {
namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

constexpr Variant kVariants[] = {Variant::EvolMPNN, Variant::EvolGNN, Variant::EvolFormer};

// Gradient correctness on every coordinate of every tensor.
Result a1() {
  const auto t0 = std::chrono::steady_clock::now();
  Result r{true, ""};
  for (Variant v : kVariants) {
    const Family f = testing::small_family(6, 4, 3, 21);
    SplitAssignment split;
    split.tags.assign(6, SplitTag::Train);
    split.tags[5] = SplitTag::Valid;
    ModelConfig c;
    c.variant = v;
    c.d = 8;
    c.heads = 2;
    c.residue_layers = 1;
    c.evolution_layers = 1;
    c.knn_k = 2;
    const ModelInputs in = make_inputs(f, split, c);
    const ModelParams p = init_params(c, f.length(), 3);
    GradientCheckOptions o;
    o.eps = 1e-4;
    o.coords_per_tensor = std::numeric_limits<std::size_t>::max();
    const auto rows = split.rows(SplitTag::Train);
    const GradientCheckReport g = gradient_check(in, p, c, rows, target_matrix(f), 7, o);
    std::size_t coords = 0;
    for (const auto& t : g.tensors) coords += t.coords;
    r.pass = r.pass && g.max_rel_error <= 1e-4;
    r.detail += std::string(to_string(v)) + " max_rel " + fmt(g.max_rel_error, 3) + " over " +
                std::to_string(coords) + " coords; ";
  }
  const double s = seconds_since(t0);
  r.pass = r.pass && s < 60.0;
  r.detail += fmt(s, 3) + " s";
  return r;
}

// Overfit capacity on a noise-free additive landscape.
Result a2() {
  const auto t0 = std::chrono::steady_clock::now();
  RandomLandscapeOptions o;
  o.n = 24;
  o.m = 64;
  o.max_mutations = 6;
  o.additive_rank = 20;
  o.seed = 7;
  const Family f = synth_family(random_landscape(o)).family;
  const SplitAssignment split = split_lambda_vs_rest(f, 24, 0.1, 7);
  ModelConfig c;
  c.d = 32;
  c.heads = 2;
  c.residue_layers = 1;
  c.evolution_layers = 2;
  TrainConfig t;
  t.lr = 3e-3;
  t.epochs = 200;
  t.batch_size = 0;
  t.patience = 0;
  t.seed = 7;
  t.track_train_spearman = true;
  const TrainResult res = train(f, split, c, t);
  double best = -1.0;
  std::size_t at = 0;
  for (const auto& e : res.report.epochs)
    if (e.train_spearman && *e.train_spearman > best) {
      best = *e.train_spearman;
      at = e.epoch;
    }
  const double s = seconds_since(t0);
  return {best >= 0.99 && s < 300.0,
          "max train rho " + fmt(best) + " at epoch " + std::to_string(at) + "; " + fmt(s, 3) + " s"};
}

// Generalisation from low- to high-order mutants on an epistatic landscape.
Result a3() {
  const auto t0 = std::chrono::steady_clock::now();
  double model_sum = 0.0, ridge_sum = 0.0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    RandomLandscapeOptions o;
    o.n = 32;
    o.m = 512;
    o.max_mutations = 8;
    o.additive_rank = 2;
    o.epistatic_terms = 20;
    o.seed = seed;
    LandscapeSpec spec = random_landscape(o);
    spec.noise_std = 0.05 * noise_free_target_std(spec);
    const Family f = synth_family(spec).family;
    const SplitAssignment split = split_lambda_vs_rest(f, 2, 0.1, seed);
    ModelConfig c;
    c.d = 16;
    c.heads = 2;
    c.residue_layers = 1;
    c.evolution_layers = 2;
    TrainConfig t;
    t.lr = 3e-3;
    t.epochs = 300;
    t.batch_size = 0;
    t.patience = 60;
    t.seed = seed;
    const TrainResult res = train(f, split, c, t);
    const double model = evaluate(res.model, f, split, SplitTag::Test).spearman.value_or(0.0);
    const double ridge = linear_baseline(f, split).spearman.value_or(0.0);
    model_sum += model;
    ridge_sum += ridge;
    detail += "seed " + std::to_string(seed) + " model " + fmt(model, 3) + " ridge " + fmt(ridge, 3) + "; ";
  }
  const double model = model_sum / 3, ridge = ridge_sum / 3, s = seconds_since(t0);
  detail += "mean model " + fmt(model, 3) + " ridge " + fmt(ridge, 3) + "; " + fmt(s, 3) + " s";
  return {model >= 0.60 && model - ridge >= 0.05 && s < 900.0, detail};
}

// Family with exactly counts[k] proteins at k substitutions from the wild type; targets come
// from `target(row, k)`.
Family family_with_counts(std::size_t length, const std::vector<std::size_t>& counts, std::uint64_t seed,
                          const std::function<double(std::size_t, std::size_t)>& target) {
  std::mt19937_64 rng(seed);
  std::string wt(length, 'A');
  for (char& ch : wt) ch = kAlphabet[rng() % kAlphabetSize];
  std::set<std::string> seen{wt};
  std::ostringstream csv;
  csv << "id,sequence,target,is_wild_type\n";
  csv << "wt," << wt << ',' << target(0, 0) << ",1\n";
  std::size_t row = 1;
  for (std::size_t k = 1; k < counts.size(); ++k)
    for (std::size_t made = 0; made < counts[k];) {
      std::vector<std::size_t> pos(length);
      for (std::size_t i = 0; i < length; ++i) pos[i] = i;
      std::shuffle(pos.begin(), pos.end(), rng);
      std::string s = wt;
      for (std::size_t i = 0; i < k; ++i) {
        char ch;
        do ch = kAlphabet[rng() % kAlphabetSize];
        while (ch == wt[pos[i]]);
        s[pos[i]] = ch;
      }
      if (!seen.insert(s).second) continue;
      csv << 'p' << row << ',' << s << ',' << target(row, k) << ",0\n";
      ++row;
      ++made;
    }
  std::istringstream in(csv.str());
  return read_family_csv(in);
}

struct Counts {
  std::size_t train, valid, test;
};

bool check_split(const Family& f, const SplitAssignment& s, Counts want, const std::string& name,
                 const std::function<bool(std::size_t)>& in_pool, std::string& detail) {
  bool ok = s.count(SplitTag::Train) == want.train && s.count(SplitTag::Valid) == want.valid &&
            s.count(SplitTag::Test) == want.test;
  for (std::size_t i = 0; i < f.size(); ++i) ok = ok && ((s.tags[i] != SplitTag::Test) == in_pool(i));
  detail += name + " " + std::to_string(s.count(SplitTag::Train)) + "/" + std::to_string(s.count(SplitTag::Valid)) +
            "/" + std::to_string(s.count(SplitTag::Test)) + (ok ? "" : " (mismatch)") + "; ";
  return ok;
}

// Split arithmetic on families shaped like the AAV and GB1 benchmarks.
Result a4() {
  Result r{true, ""};
  // AAV-like: 82,583 proteins, 31,807 within two substitutions, 47,546 at or below the wild type.
  {
    const std::vector<std::size_t> counts{1, 500, 31306, 9000, 9000, 9000, 8000, 7000, 5000, 3776};
    const Family f = family_with_counts(40, counts, 11, [](std::size_t row, std::size_t) {
      return row == 0 ? 0.0 : (row % 82583 < 47546 ? -1.0 - static_cast<double>(row % 97) : 1.0 + row % 89);
    });
    r.pass = r.pass && f.size() == 82583;
    const SplitAssignment lam = split_lambda_vs_rest(f, 2, 0.1, 1);
    r.pass = r.pass && check_split(f, lam, {28626, 3181, 50776}, "AAV 2-vs-Rest",
                                   [&](std::size_t i) { return f.mutation_count(i) <= 2; }, r.detail);
    const SplitAssignment low = split_low_vs_high(f, 0.1, 1);
    r.pass = r.pass && check_split(f, low, {42791, 4755, 35037}, "AAV Low-vs-High",
                                   [&](std::size_t i) { return f.record(i).target[0] <= 0.0; }, r.detail);
  }
  // GB1-like: four sites, 8,733 proteins, 424 within two substitutions, 5,089 at or below the
  // wild type (some tied with it).
  {
    const std::vector<std::size_t> counts{1, 60, 363, 4000, 4309};
    const Family f = family_with_counts(4, counts, 12, [](std::size_t row, std::size_t) {
      if (row == 0) return 1.0;
      if (row < 5089) return row % 10 == 0 ? 1.0 : 1.0 - static_cast<double>(row % 50) / 60.0;
      return 1.0 + static_cast<double>(row % 70 + 1) / 10.0;
    });
    r.pass = r.pass && f.size() == 8733;
    const SplitAssignment lam = split_lambda_vs_rest(f, 2, 0.1, 1);
    r.pass = r.pass && check_split(f, lam, {381, 43, 8309}, "GB1 2-vs-Rest",
                                   [&](std::size_t i) { return f.mutation_count(i) <= 2; }, r.detail);
    const SplitAssignment low = split_low_vs_high(f, 0.1, 1);
    r.pass = r.pass && check_split(f, low, {4580, 509, 3644}, "GB1 Low-vs-High",
                                   [&](std::size_t i) { return f.record(i).target[0] <= 1.0; }, r.detail);
    // the pool identity holds for every lambda
    for (int lambda = 1; lambda <= 4; ++lambda) {
      const SplitAssignment s = split_lambda_vs_rest(f, lambda, 0.1, 3);
      for (std::size_t i = 0; i < f.size(); ++i)
        r.pass = r.pass && ((s.tags[i] != SplitTag::Test) == (f.mutation_count(i) <= static_cast<std::size_t>(lambda)));
    }
    r.detail += "pool identity checked for lambda 1..4";
  }
  return r;
}

// Anchor sampler statistics.
Result a5() {
  Result r{true, ""};
  for (std::size_t m : {256, 1024}) {
    std::vector<std::string> ids(m);
    for (std::size_t i = 0; i < m; ++i) ids[i] = "p" + std::to_string(i);
    const std::size_t k = anchor_count(m);
    std::vector<double> sum(k, 0.0);
    constexpr std::size_t kSeeds = 200;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      AnchorPolicy policy;
      policy.seed = seed;
      const auto sets = sample_anchor_sets(ids, policy, 0, ids[0]);
      for (std::size_t j = 0; j < k; ++j) sum[j] += static_cast<double>(sets[j].sampled_size);
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = inclusion_probability(j + 1, m);
      const double mean = static_cast<double>(m) * p;
      const double sigma = std::sqrt(static_cast<double>(m) * p * (1 - p) / kSeeds);
      worst = std::max(worst, std::abs(sum[j] / kSeeds - mean) / sigma);
    }
    r.pass = r.pass && worst <= 3.0;
    r.detail += "M " + std::to_string(m) + " k " + std::to_string(k) + " worst |z| " + fmt(worst, 3) + "; ";
  }
  const std::size_t k2 = anchor_count(2), k_gb1 = anchor_count(8733), k_aav = anchor_count(82583);
  r.pass = r.pass && k2 == 1 && k_gb1 == 196 && k_aav == 289;
  r.detail += "k(2,8733,82583) = " + std::to_string(k2) + "," + std::to_string(k_gb1) + "," + std::to_string(k_aav);
  return r;
}

// Metric oracles.
Result a6() {
  Result r{true, ""};
  std::mt19937_64 rng(6);
  double worst_rho = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> a(n), b(n);
    const bool ties = trial % 2;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(rng() % 5) : std::normal_distribution<double>()(rng);
      b[i] = ties ? static_cast<double>(rng() % 7) : std::normal_distribution<double>()(rng);
    }
    const auto got = try_spearman(a, b);
    if (!got) continue;  // constant draws
    worst_rho = std::max(worst_rho, std::abs(*got - oracle::spearman(a, b)));
  }
  r.pass = worst_rho <= 1e-12;
  r.detail += "spearman max diff " + fmt(worst_rho, 3) + "; ";

  double worst_alpha = 0.0;
  for (std::size_t n = 4; n <= 8; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix x = testing::random_matrix(n, 3, rng);
      const Matrix pts = testing::random_matrix(n, 2, rng);
      const DistanceFn base = [&](std::size_t i, std::size_t j) {
        return std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1));
      };
      const double p = trial % 2 ? 1.0 : 2.0;
      const double want = oracle::distortion(x, base, p);
      worst_alpha = std::max(worst_alpha, std::abs(distortion(x, base, p).alpha - want) / want);
    }
  r.pass = r.pass && worst_alpha <= 1e-12;
  r.detail += "distortion max rel diff " + fmt(worst_alpha, 3) + "; ";

  // Reference embedder on 128 random planar points; k doubles from 4 up to the first power
  // of two covering the default ceil(log2 n)^2 = 49 sets.
  constexpr std::size_t kPoints = 128;
  std::vector<double> medians;
  bool finite = true;
  for (std::size_t k = 4; k / 2 < anchor_count(kPoints); k *= 2) {
    std::vector<double> alphas;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 g(100 + seed);
      const Matrix pts = testing::random_matrix(kPoints, 2, g);
      const DistanceFn base = [&](std::size_t i, std::size_t j) {
        return std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1));
      };
      const double a = distortion(reference_embedder(kPoints, base, k, seed), base, 1.0).alpha;
      finite = finite && std::isfinite(a);
      alphas.push_back(a);
    }
    std::sort(alphas.begin(), alphas.end());
    medians.push_back(0.5 * (alphas[4] + alphas[5]));
  }
  bool trend = true;
  for (std::size_t i = 1; i < medians.size(); ++i) trend = trend && medians[i] <= medians[i - 1];
  r.pass = r.pass && finite && trend;
  r.detail += "embedder median alpha k=4..64:";
  for (double m : medians) r.detail += " " + fmt(m, 4);
  if (!finite) r.detail += " (infinite alpha seen)";
  return r;
}

// Determinism and checkpoint persistence.
Result a7() {
  Result r{true, ""};
  const Family f = testing::small_family(80, 10, 4, 71);
  const SplitAssignment split = split_lambda_vs_rest(f, 2, 0.2, 7);
  testing::TempDir dir("acceptance");
  for (Variant v : kVariants) {
    ModelConfig c;
    c.variant = v;
    c.d = 16;
    c.heads = 2;
    c.residue_layers = 1;
    c.evolution_layers = 2;
    c.knn_k = 4;
    TrainConfig t;
    t.epochs = 5;
    t.batch_size = 16;
    t.lr = 3e-3;
    t.seed = 9;
    const TrainResult a = train(f, split, c, t), b = train(f, split, c, t);
    const std::string where = (dir / std::string(to_string(v))).string();
    save_checkpoint(where, a.model, f.length());
    const Checkpoint loaded = load_checkpoint(where);
    const std::string direct = to_json(evaluate(a.model, f, split, SplitTag::Test)).dump();
    const std::string reloaded = to_json(evaluate(loaded.model, f, split, SplitTag::Test)).dump();
    const bool ok = same_outcome(a.report, b.report) && a.model.params == b.model.params &&
                    loaded.model.params == a.model.params && direct == reloaded;
    r.pass = r.pass && ok;
    r.detail += std::string(to_string(v)) + (ok ? " identical; " : " differs; ");
  }
  return r;
}

// Per-epoch time as the family doubles.
Result a8() {
  std::vector<double> per_epoch;
  for (std::size_t m : {1024, 2048}) {
    RandomLandscapeOptions o;
    o.n = 16;
    o.m = m;
    o.max_mutations = 4;
    o.seed = 5;
    const Family f = synth_family(random_landscape(o)).family;
    const SplitAssignment split = split_lambda_vs_rest(f, 16, 0.1, 5);
    ModelConfig c;
    c.d = 16;
    c.heads = 2;
    c.residue_layers = 1;
    c.evolution_layers = 2;
    TrainConfig t;
    t.lr = 1e-3;
    t.epochs = 3;
    t.batch_size = 0;
    t.patience = 0;
    t.seed = 5;
    const TrainResult res = train(f, split, c, t);
    double w = 0.0;
    for (const auto& e : res.report.epochs) w += e.wall_s;
    per_epoch.push_back(w / static_cast<double>(res.report.epochs.size()));
  }
  const double ratio = per_epoch[1] / per_epoch[0];
  return {ratio <= 2.6, "per-epoch " + fmt(per_epoch[0], 3) + " s -> " + fmt(per_epoch[1], 3) + " s, ratio " +
                            fmt(ratio, 3)};
}

// Duplicated sequences receive identical predictions.
Result a9() {
  Result r{true, ""};
  const Family base = testing::small_family(30, 8, 4, 91);
  std::vector<ProteinRecord> records = base.records();
  // copies of rows 3, 11 and 20 placed at the front, middle and end
  const std::vector<std::size_t> copied{3, 11, 20};
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t n = 0; n < copied.size(); ++n) {
    ProteinRecord dup = base.record(copied[n]);
    dup.id = "dup" + std::to_string(n);
    dup.target[0] += 0.5;
    const std::size_t at = n == 0 ? 0 : (n == 1 ? records.size() / 2 : records.size());
    records.insert(records.begin() + static_cast<std::ptrdiff_t>(at), dup);
  }
  const Family f(records);
  for (std::size_t n = 0; n < copied.size(); ++n)
    pairs.emplace_back(*f.index_of(base.record(copied[n]).id), *f.index_of("dup" + std::to_string(n)));
  const SplitAssignment split = split_lambda_vs_rest(f, 2, 0.2, 3);

  for (Variant v : {Variant::EvolMPNN, Variant::EvolFormer, Variant::EvolGNN}) {
    ModelConfig c;
    c.variant = v;
    c.d = 16;
    c.heads = 2;
    c.residue_layers = 1;
    c.evolution_layers = 2;
    c.knn_k = 3;
    // float64 weights straight from initialisation
    const ModelInputs in = make_inputs(f, split, c);
    std::vector<std::size_t> rows(f.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const Matrix y64 = forward(in, init_params(c, f.length(), 4), c, rows, 1).y;
    // float32 weights from training
    TrainConfig t;
    t.epochs = 3;
    t.batch_size = 0;
    const TrainResult trained = train(f, split, c, t);
    const Matrix y32 = predict(trained.model, make_inputs(f, split, trained.model.config), rows);
    double d64 = 0.0, d32 = 0.0;
    for (const auto& [i, j] : pairs) {
      d64 = std::max(d64, std::abs(y64(i, 0) - y64(j, 0)));
      d32 = std::max(d32, std::abs(y32(i, 0) - y32(j, 0)) / std::max(std::abs(y32(i, 0)), 1e-12));
    }
    const bool ok = d64 == 0.0 && d32 <= 1e-6;
    // evolgnn neighbourhoods break ties by row index, so duplicates can see different graphs;
    // it is reported but not held to the invariant.
    if (v != Variant::EvolGNN) r.pass = r.pass && ok;
    r.detail += std::string(to_string(v)) + (v == Variant::EvolGNN ? " (informational)" : "") + " float64 diff " +
                fmt(d64, 3) + " float32 rel " + fmt(d32, 3) + "; ";
  }
  return r;
}

}  // namespace
}  // namespace evolmpnn

int main(int argc, char** argv) {
  using namespace evolmpnn;
  const std::vector<std::pair<std::string, std::function<Result()>>> checks{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}};
  const std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted)
    if (std::none_of(checks.begin(), checks.end(), [&](const auto& c) { return c.first == w; })) {
      std::cerr << "unknown check " << w << "\n";
      return 2;
    }
  bool all = true;
  for (const auto& [name, run] : checks) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Result res;
    try {
      res = run();
    } catch (const std::exception& e) {
      res = {false, std::string("threw: ") + e.what()};
    }
    all = all && res.pass;
    std::cout << name << ' ' << (res.pass ? "PASS" : "FAIL") << "  " << res.detail << std::endl;
  }
  return all ? 0 : 1;
}
