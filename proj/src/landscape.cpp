#include "evolmpnn/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "evolmpnn/error.hpp"

namespace evolmpnn {

namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

char residue_from_json(const nlohmann::json& v) {
  if (v.is_string() && v.get<std::string>().size() == 1) return v.get<std::string>()[0];
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i >= 0 && i < static_cast<long long>(kAlphabetSize)) return kAlphabet[static_cast<std::size_t>(i)];
  }
  throw ValidationError("epistatic residue must be a one-letter code or an alphabet index");
}

}  // namespace

void LandscapeSpec::validate() const {
  if (n == 0) throw ValidationError("landscape: n must be positive");
  if (m < 2) throw ValidationError("landscape: m must be at least 2");
  if (max_mutations == 0) throw ValidationError("landscape: max_mutations must be positive");
  if (additive.size() != n) throw ValidationError("landscape: additive needs n rows of 20 weights");
  for (const auto& row : additive)
    for (double w : row)
      if (!std::isfinite(w)) throw ValidationError("landscape: non-finite additive weight");
  for (const auto& t : epistasis) {
    if (t.p >= n || t.q >= n) throw ValidationError("landscape: epistatic position out of range");
    if (residue_index(t.a) < 0 || residue_index(t.b) < 0)
      throw ValidationError("landscape: epistatic residue outside the alphabet");
    if (!std::isfinite(t.weight)) throw ValidationError("landscape: non-finite epistatic weight");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ValidationError("landscape: noise_std must be a finite non-negative number");
  if (wild_type) {
    if (wild_type->size() != n) throw ValidationError("landscape: wild_type length differs from n");
    for (char c : *wild_type)
      if (residue_index(c) < 0) throw ValidationError("landscape: invalid wild_type residue");
  }
}

LandscapeSpec landscape_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"n", "m", "max_mutations", "additive", "epistasis",
                                               "noise_std", "seed", "wild_type"};
  if (!j.is_object()) throw ValidationError("landscape spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("landscape: unknown key '" + key + "'");
  try {
    LandscapeSpec s;
    s.n = j.at("n").get<std::size_t>();
    s.m = j.at("m").get<std::size_t>();
    s.max_mutations = j.at("max_mutations").get<std::size_t>();
    for (const auto& row : j.at("additive")) {
      if (row.size() != kAlphabetSize) throw ValidationError("landscape: additive rows need 20 weights");
      std::array<double, kAlphabetSize> w{};
      for (std::size_t a = 0; a < kAlphabetSize; ++a) w[a] = row.at(a).get<double>();
      s.additive.push_back(w);
    }
    if (j.contains("epistasis")) {
      for (const auto& t : j.at("epistasis")) {
        EpistaticTerm e;
        e.p = t.at("p").get<std::size_t>();
        e.q = t.at("q").get<std::size_t>();
        e.a = residue_from_json(t.at("a"));
        e.b = residue_from_json(t.at("b"));
        e.weight = t.at("weight").get<double>();
        s.epistasis.push_back(e);
      }
    }
    s.noise_std = j.value("noise_std", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("wild_type")) s.wild_type = j.at("wild_type").get<std::string>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("landscape: ") + e.what());
  }
}

nlohmann::json landscape_to_json(const LandscapeSpec& spec) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["m"] = spec.m;
  j["max_mutations"] = spec.max_mutations;
  j["additive"] = nlohmann::json::array();
  for (const auto& row : spec.additive) j["additive"].push_back(row);
  j["epistasis"] = nlohmann::json::array();
  for (const auto& t : spec.epistasis)
    j["epistasis"].push_back({{"p", t.p}, {"q", t.q}, {"a", std::string(1, t.a)},
                              {"b", std::string(1, t.b)}, {"weight", t.weight}});
  j["noise_std"] = spec.noise_std;
  j["seed"] = spec.seed;
  if (spec.wild_type) j["wild_type"] = *spec.wild_type;
  return j;
}

double landscape_value(const LandscapeSpec& spec, std::string_view sequence) {
  if (sequence.size() != spec.n) throw ValidationError("landscape: sequence length differs from n");
  double y = 0.0;
  for (std::size_t p = 0; p < spec.n; ++p) {
    const int a = residue_index(sequence[p]);
    if (a < 0) throw ValidationError("landscape: invalid residue");
    y += spec.additive[p][static_cast<std::size_t>(a)];
  }
  for (const auto& t : spec.epistasis)
    if (sequence[t.p] == t.a && sequence[t.q] == t.b) y += t.weight;
  return y;
}

SyntheticFamily synth_family(const LandscapeSpec& spec) {
  spec.validate();
  std::mt19937_64 seq_rng(spec.seed);
  std::mt19937_64 noise_rng(spec.seed ^ kNoiseStream);
  std::uniform_int_distribution<int> any_residue(0, static_cast<int>(kAlphabetSize) - 1);
  std::uniform_int_distribution<int> other_residue(0, static_cast<int>(kAlphabetSize) - 2);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::string wt;
  if (spec.wild_type) {
    wt = *spec.wild_type;
  } else {
    for (std::size_t p = 0; p < spec.n; ++p) wt.push_back(kAlphabet[any_residue(seq_rng)]);
  }

  const std::size_t max_mut = std::min(spec.max_mutations, spec.n);
  std::uniform_int_distribution<std::size_t> mut_count(1, max_mut);
  const std::size_t width = std::to_string(spec.m - 1).size();

  std::vector<ProteinRecord> records;
  std::vector<double> truth;
  records.reserve(spec.m);
  std::vector<std::size_t> positions(spec.n);
  for (std::size_t i = 0; i < spec.m; ++i) {
    ProteinRecord r;
    r.sequence = wt;
    if (i == 0) {
      r.id = "wt";
      r.is_wild_type = true;
    } else {
      std::string num = std::to_string(i);
      r.id = "mut_" + std::string(width - num.size(), '0') + num;
      std::iota(positions.begin(), positions.end(), std::size_t{0});
      const std::size_t c = mut_count(seq_rng);
      for (std::size_t k = 0; k < c; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, spec.n - 1);
        std::swap(positions[k], positions[pick(seq_rng)]);
        const std::size_t p = positions[k];
        const int old = residue_index(wt[p]);
        int fresh = other_residue(seq_rng);
        if (fresh >= old) ++fresh;
        r.sequence[p] = kAlphabet[static_cast<std::size_t>(fresh)];
      }
    }
    const double y = landscape_value(spec, r.sequence);
    truth.push_back(y);
    r.target = {spec.noise_std > 0.0 ? y + spec.noise_std * noise(noise_rng) : y};
    records.push_back(std::move(r));
  }
  return SyntheticFamily{Family(std::move(records)), std::move(truth)};
}

LandscapeSpec random_landscape(const RandomLandscapeOptions& o) {
  LandscapeSpec s;
  s.n = o.n;
  s.m = o.m;
  s.max_mutations = o.max_mutations;
  s.noise_std = o.noise_std;
  s.seed = o.seed;
  std::mt19937_64 rng(o.seed ^ 0x5deece66dULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> any_residue(0, static_cast<int>(kAlphabetSize) - 1);

  std::string wt;
  for (std::size_t p = 0; p < o.n; ++p) wt.push_back(kAlphabet[any_residue(rng)]);
  s.wild_type = wt;

  const std::size_t rank = std::max<std::size_t>(1, o.additive_rank);
  std::vector<double> u(o.n * rank), v(kAlphabetSize * rank);
  for (double& x : u) x = gauss(rng);
  for (double& x : v) x = gauss(rng);
  const double norm = o.additive_scale / std::sqrt(static_cast<double>(rank));
  s.additive.resize(o.n);
  for (std::size_t p = 0; p < o.n; ++p)
    for (std::size_t a = 0; a < kAlphabetSize; ++a) {
      double w = 0.0;
      for (std::size_t r = 0; r < rank; ++r) w += u[p * rank + r] * v[a * rank + r];
      s.additive[p][a] = norm * w;
    }

  std::uniform_int_distribution<std::size_t> pos(0, o.n - 1);
  for (std::size_t t = 0; t < o.epistatic_terms && o.n >= 2; ++t) {
    EpistaticTerm e;
    e.p = pos(rng);
    do {
      e.q = pos(rng);
    } while (e.q == e.p);
    e.a = wt[e.p];
    e.b = wt[e.q];
    e.weight = o.epistatic_scale * std::abs(gauss(rng));
    s.epistasis.push_back(e);
  }
  s.validate();
  return s;
}

double noise_free_target_std(const LandscapeSpec& spec) {
  const SyntheticFamily f = synth_family(spec);
  const auto& y = f.noise_free;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(y.size()));
}

}  // namespace evolmpnn
