#include "evolmpnn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "evolmpnn/checkpoint.hpp"
#include "evolmpnn/error.hpp"
#include "evolmpnn/evaluation.hpp"
#include "evolmpnn/landscape.hpp"
#include "evolmpnn/run_config.hpp"
#include "evolmpnn/split.hpp"
#include "evolmpnn/training.hpp"

namespace evolmpnn {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

struct Sidecars {
  std::optional<ProteinEmbeddings> proteins;
  std::optional<ResidueEmbeddings> residues;

  const ProteinEmbeddings* protein_ptr() const { return proteins ? &*proteins : nullptr; }
  const ResidueEmbeddings* residue_ptr() const { return residues ? &*residues : nullptr; }
};

Sidecars load_sidecars(const Family& family, const DataConfig& data, const ModelConfig& model) {
  Sidecars s;
  if (model.protein_mode == ProteinMode::Sidecar) {
    if (!data.protein_sidecar) throw ValidationError("protein sidecar path is missing");
    s.proteins = load_protein_sidecar(family, *data.protein_sidecar);
  }
  if (model.residue_mode == ResidueMode::Sidecar) {
    if (!data.residue_sidecar) throw ValidationError("residue sidecar path is missing");
    s.residues = load_residue_sidecar(family, *data.residue_sidecar);
  }
  return s;
}

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  LandscapeSpec spec = landscape_from_json(read_json(a.config));
  if (a.seed) spec.seed = *a.seed;
  const SyntheticFamily s = synth_family(spec);
  save_family(a.out, s.family);
  out << nlohmann::json{{"out", a.out}, {"proteins", s.family.size()}, {"length", s.family.length()}}.dump() << '\n';
}

struct SplitArgs {
  std::string family, mode, out;
  std::optional<int> lambda;
  double valid_frac = 0.1;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  const Family family = load_family(a.family);
  SplitAssignment split;
  if (a.mode == "lambda") {
    if (!a.lambda) throw ValidationError("--mode lambda needs --lambda");
    split = split_lambda_vs_rest(family, *a.lambda, a.valid_frac, a.seed);
  } else {
    split = split_low_vs_high(family, a.valid_frac, a.seed);
  }
  for (const auto& w : split.warnings) err << nlohmann::json{{"warning", w}}.dump() << '\n';
  save_split(a.out, family, split);
  out << nlohmann::json{{"out", a.out},
                        {"train", split.count(SplitTag::Train)},
                        {"valid", split.count(SplitTag::Valid)},
                        {"test", split.count(SplitTag::Test)}}
             .dump()
      << '\n';
}

struct TrainArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> knn_k;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.variant) rc.model.variant = parse_variant(*a.variant);
  if (a.knn_k) {
    if (*a.knn_k == 0) throw ValidationError("--knn-k must be positive");
    rc.model.knn_k = *a.knn_k;
    rc.data.knn_k = *a.knn_k;
  }
  const Family family = load_family(rc.data.family);
  const SplitAssignment split = load_split(rc.data.split, family);
  const Sidecars sidecars = load_sidecars(family, rc.data, rc.model);

  std::filesystem::create_directories(a.out);
  std::ofstream log(std::filesystem::path(a.out) / "train_log.jsonl");
  if (!log) throw ValidationError("cannot write the training log in " + a.out);
  const TrainResult r =
      train(family, split, rc.model, rc.train, sidecars.residue_ptr(), sidecars.protein_ptr(), &log);
  rc.model = r.model.config;
  save_checkpoint(a.out, r.model, family.length(), to_json(rc));

  nlohmann::json summary{{"out", a.out},
                         {"epochs", r.report.epochs.size()},
                         {"best_epoch", r.report.best_epoch},
                         {"best_valid_spearman", nullptr}};
  if (r.report.best_valid_spearman) summary["best_valid_spearman"] = *r.report.best_valid_spearman;
  out << summary.dump() << '\n';
}

// Data paths come from the checkpoint's embedded config unless a run config is given.
DataConfig data_for(const Checkpoint& ck, const std::optional<std::string>& config) {
  if (config) return load_run_config(*config).data;
  return run_config_from_json(ck.run_config, std::filesystem::current_path()).data;
}

struct EvalArgs {
  std::string checkpoint;
  std::optional<std::string> config, split;
  std::string tag = "test";
  std::string group_edges = "1,3,5,8";
  bool timing = false;
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const DataConfig data = data_for(ck, a.config);
  const std::vector<std::size_t> edges = parse_group_edges(a.group_edges);
  const Family family = load_family(data.family);
  if (family.length() != ck.length) throw ValidationError("family sequence length does not match the checkpoint");
  const SplitAssignment split = load_split(a.split ? std::filesystem::path(*a.split) : data.split, family);
  const Sidecars sidecars = load_sidecars(family, data, ck.model.config);
  Metrics m = evaluate(ck.model, family, split, parse_split_tag(a.tag), edges, sidecars.residue_ptr(),
                       sidecars.protein_ptr());
  if (a.timing) m.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << to_json(m).dump() << '\n';
}

struct DistortionArgs {
  std::string family;
  std::optional<std::string> checkpoint, split;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double p = 2.0;
};

void run_distortion(const DistortionArgs& a, std::ostream& out) {
  const Family family = load_family(a.family);
  Matrix embedded;
  if (a.checkpoint) {
    const Checkpoint ck = load_checkpoint(*a.checkpoint);
    if (family.length() != ck.length) throw ValidationError("family sequence length does not match the checkpoint");
    const DataConfig data = data_for(ck, std::nullopt);
    const SplitAssignment split = load_split(a.split ? std::filesystem::path(*a.split) : data.split, family);
    const Sidecars sidecars = load_sidecars(family, data, ck.model.config);
    const ModelInputs inputs =
        make_inputs(family, split, ck.model.config, sidecars.residue_ptr(), sidecars.protein_ptr());
    std::vector<std::size_t> rows(family.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    embedded = forward(inputs, ck.model.params, ck.model.config, rows, evaluation_anchor_seed(ck.model.config)).z;
  } else {
    embedded = reference_embedder(
        family.size(),
        [&](std::size_t i, std::size_t j) {
          return static_cast<double>(hamming(family.record(i).sequence, family.record(j).sequence));
        },
        a.k, a.seed);
  }
  out << to_json(distortion(embedded, family, a.p)).dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolution-aware message passing for protein mutant property prediction", "evolmpnn"};
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic family from a landscape JSON spec");
  s->add_option("--config", synth.config, "Landscape spec JSON")->required();
  s->add_option("--out", synth.out, "Family CSV to write")->required();
  s->add_option("--seed", synth.seed, "Override the spec's seed");

  SplitArgs split;
  auto* sp = app.add_subcommand("split", "Write a train/valid/test split CSV");
  sp->add_option("family", split.family, "Family CSV")->required();
  sp->add_option("--mode", split.mode, "lambda or low-high")->required()->check(CLI::IsMember({"lambda", "low-high"}));
  sp->add_option("--lambda", split.lambda, "Maximum mutation count of the training pool");
  sp->add_option("--valid-frac", split.valid_frac, "Fraction of the pool held out for validation");
  sp->add_option("--seed", split.seed, "Seed of the validation draw");
  sp->add_option("--out", split.out, "Split CSV to write")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  t->add_option("--config", tr.config, "Run config JSON")->required();
  t->add_option("--out", tr.out, "Checkpoint directory")->required();
  t->add_option("--seed", tr.seed, "Override train.seed");
  t->add_option("--variant", tr.variant, "evolmpnn, evolgnn or evolformer")
      ->check(CLI::IsMember({"evolmpnn", "evolgnn", "evolformer"}));
  t->add_option("--knn-k", tr.knn_k, "Neighbours per protein in the evolgnn graph");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint; prints Metrics JSON");
  e->add_option("checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--config", ev.config, "Run config whose data section replaces the checkpoint's");
  e->add_option("--split", ev.split, "Split CSV replacing the configured one");
  e->add_option("--split-tag", ev.tag, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
  e->add_option("--group-edges", ev.group_edges, "Lower edges of the mutation-count groups");
  e->add_flag("--timing", ev.timing, "Report wall-clock runtime_s");

  DistortionArgs di;
  auto* d = app.add_subcommand("distortion", "Distortion of an embedding against Hamming distance");
  d->add_option("family", di.family, "Family CSV")->required();
  d->add_option("--checkpoint", di.checkpoint, "Embed with this model's final embeddings");
  d->add_option("--split", di.split, "Split CSV (anchor pool) for --checkpoint");
  d->add_option("--k", di.k, "Landmark sets of the reference embedder (0: ceil(log2 M)^2)");
  d->add_option("--seed", di.seed, "Seed of the reference embedder");
  d->add_option("--p", di.p, "Order of the embedded L_p distance");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << nlohmann::json{{"error", ex.what()}}.dump() << '\n' << app.help();
    return 2;
  }

  try {
    if (s->parsed()) run_synth(synth, out);
    else if (sp->parsed()) run_split(split, out, err);
    else if (t->parsed()) run_train(tr, out);
    else if (e->parsed()) run_eval(ev, out);
    else if (d->parsed()) run_distortion(di, out);
  } catch (const std::exception& ex) {
    err << nlohmann::json{{"error", ex.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace evolmpnn
