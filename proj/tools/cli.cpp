#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "roundbuy/baseline.hpp"
#include "roundbuy/catalog.hpp"
#include "roundbuy/checks.hpp"
#include "roundbuy/dataset.hpp"
#include "roundbuy/embeddings.hpp"
#include "roundbuy/error.hpp"
#include "roundbuy/evaluation.hpp"
#include "roundbuy/model.hpp"
#include "roundbuy/synth.hpp"
#include "roundbuy/training.hpp"

namespace roundbuy::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::InsufficientSupport:
      return kUsage;
    case Errc::NonFinite:
    case Errc::ShapeMismatch:
    case Errc::MismatchedStores:
      return kInternal;
    default:
      return kData;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw Error(Errc::Io, "cannot write " + path.string());
}

std::string hex_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const Catalog& load_catalog(const std::string& path, std::unique_ptr<Catalog>& holder) {
  if (path.empty()) return Catalog::default_fixture();
  holder = std::make_unique<Catalog>(Catalog::load(path));
  return *holder;
}

std::vector<MatchRecord> read_jsonl(const fs::path& path, const Catalog& catalog) {
  std::istringstream in(read_file(path));
  std::vector<MatchRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_match(line, catalog));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<MatchRecord>& matches) {
  std::string out;
  for (const auto& m : matches) out += serialize_match(m);
  return out;
}

// A split directory (written by `ingest`), a .jsonl file, or a directory of
// raw match documents, which is ingested and cleaned on the fly.
std::vector<MatchRecord> load_any(const fs::path& path, const Catalog& catalog) {
  if (fs::is_regular_file(path)) return read_jsonl(path, catalog);
  if (fs::exists(path / "train.jsonl")) {
    std::vector<MatchRecord> all;
    for (const char* part : {"train", "dev", "test"}) {
      auto ms = read_jsonl(path / (std::string(part) + ".jsonl"), catalog);
      all.insert(all.end(), std::make_move_iterator(ms.begin()), std::make_move_iterator(ms.end()));
    }
    return all;
  }
  return clean_matches(ingest_matches(path, catalog).matches, catalog).kept;
}

std::vector<std::vector<EpisodeTask>> tasks_by_match(const std::vector<MatchRecord>& matches, int shots) {
  std::vector<std::vector<EpisodeTask>> out;
  for (const auto& m : matches) {
    auto t = build_tasks(m, shots);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<EpisodeTask> flatten(std::vector<std::vector<EpisodeTask>> nested) {
  std::vector<EpisodeTask> out;
  for (auto& ts : nested)
    for (auto& t : ts) out.push_back(std::move(t));
  return out;
}

struct Options {
  std::string catalog;

  std::string input;
  std::string out;
  std::string data;
  std::string split = "test";
  std::string checkpoint;
  std::string json_out;
  std::string label;
  std::string embeddings;
  std::uint64_t seed = 2024;

  SynthConfig synth;
  CbowConfig cbow;
  TrainConfig train;
  ModelConfig model;
  std::string arity = "multi";
  std::uint64_t init_seed = 1;
  bool no_anneal = false;
  bool no_rae = false;
  bool no_gates = false;
  bool multiset = false;
  int shots = 0;  // eval override; 0 keeps the checkpoint's value
  std::uint64_t gradcheck_seed = 5;
  double tolerance = kGradTolerance;
};

int cmd_ingest(const Options& o, const Catalog& catalog, std::ostream& out, std::ostream& err) {
  IngestResult ingested = ingest_matches(o.input, catalog);
  const std::size_t documents = ingested.matches.size() + ingested.diagnostics.size();
  CleanResult cleaned = clean_matches(std::move(ingested.matches), catalog);
  DatasetSplit split = split_dataset(cleaned.kept, o.seed);

  const fs::path dir(o.out);
  write_file(dir / "train.jsonl", to_jsonl(split.train));
  write_file(dir / "dev.jsonl", to_jsonl(split.dev));
  write_file(dir / "test.jsonl", to_jsonl(split.test));

  json manifest;
  manifest["format"] = "roundbuy-split/1";
  manifest["seed"] = o.seed;
  manifest["documents"] = documents;
  manifest["rejected_documents"] = ingested.diagnostics;
  json dropped = json::array();
  for (const auto& r : cleaned.rejections)
    dropped.push_back({{"match_id", r.match_id},
                       {"round", r.round_index},
                       {"player_slot", r.player_slot},
                       {"reason", std::string(to_string(r.reason))}});
  manifest["dropped_matches"] = dropped;
  const auto ids = [](const std::vector<MatchRecord>& ms) {
    json a = json::array();
    for (const auto& m : ms) a.push_back(m.match_id);
    return a;
  };
  manifest["splits"] = {{"train", ids(split.train)}, {"dev", ids(split.dev)}, {"test", ids(split.test)}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  for (const auto& d : ingested.diagnostics) err << "rejected: " << d << "\n";
  for (const auto& r : cleaned.rejections)
    err << "dropped: " << r.match_id << " round " << r.round_index << " slot " << r.player_slot << ": "
        << to_string(r.reason) << "\n";
  out << "documents " << documents << ", kept " << cleaned.kept.size() << ", train " << split.train.size()
      << ", dev " << split.dev.size() << ", test " << split.test.size() << "\n";
  return kOk;
}

int cmd_stats(const Options& o, const Catalog& catalog, std::ostream& out) {
  const auto matches = load_any(o.data, catalog);
  const std::string table = format_stats_table(purchase_count_stats(matches, catalog));
  if (!o.out.empty()) write_file(o.out, table);
  out << table;
  return kOk;
}

int cmd_synth(const Options& o, const Catalog& catalog, std::ostream& out) {
  const auto matches = synth_matches(o.synth, catalog);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  for (const auto& m : matches) write_file(dir / (m.match_id + ".json"), serialize_match(m));
  out << "wrote " << matches.size() << " matches to " << dir.string() << "\n";
  return kOk;
}

int cmd_pretrain_embed(const Options& o, const Catalog& catalog, std::ostream& out) {
  const fs::path src = fs::is_directory(o.data) ? fs::path(o.data) / "train.jsonl" : fs::path(o.data);
  const auto matches = read_jsonl(src, catalog);
  std::vector<ActionSequence> sequences;
  for (const auto& m : matches)
    for (const auto& r : m.rounds)
      for (const auto& label : r.labels) sequences.push_back(label);
  const CbowResult res = cbow_train(sequences, catalog, o.cbow);
  std::ostringstream text;
  export_embeddings(text, build_vocab(catalog), res.embeddings);
  write_file(o.out, text.str());
  char buf[96];
  std::snprintf(buf, sizeof buf, "loss %.6f -> %.6f over %zu epochs\n", res.epoch_loss.front(),
                res.epoch_loss.back(), res.epoch_loss.size());
  out << buf;
  return kOk;
}

std::string checkpoint_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%06d.ckpt", iteration);
  return buf;
}

int cmd_train(const Options& o, const Catalog& catalog, std::ostream& out) {
  ModelConfig mc = o.model;
  mc.arity = o.arity == "single" ? DecoderArity::Single : DecoderArity::Multi;
  TrainConfig tc = o.train;
  tc.anneal = !o.no_anneal;
  tc.use_rae = !o.no_rae;

  const fs::path data(o.data);
  const auto train_matches = read_jsonl(data / "train.jsonl", catalog);
  const auto train_tasks = tasks_by_match(train_matches, tc.shots);

  const PolicyModel model(catalog, mc);
  ad::ParamStore theta = model.init_params(o.init_seed);
  if (!o.embeddings.empty()) {
    std::istringstream in(read_file(o.embeddings));
    ad::Tensor table = import_embeddings(in, build_vocab(catalog));
    if (!table.same_shape(theta.at(kEmbeddingParam)))
      throw Error(Errc::InvalidConfig, "embedding width " + std::to_string(table.cols()) + " does not match --d-emb " +
                                           std::to_string(mc.d_emb));
    theta.at(kEmbeddingParam) = std::move(table);
  }

  const auto make_checkpoint = [&](const ad::ParamStore& params, int iterations) {
    ad::Checkpoint ckpt;
    ckpt.params = params;
    write_model_metadata(mc, ckpt.metadata);
    write_train_metadata(tc, ckpt.metadata);
    ckpt.metadata["catalog.weapons"] = std::to_string(catalog.size());
    ckpt.metadata["init_seed"] = std::to_string(o.init_seed);
    ckpt.metadata["iterations"] = std::to_string(iterations);
    return ckpt;
  };

  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ostringstream log;
  MetaHooks hooks;
  hooks.log = &log;
  hooks.on_checkpoint = [&](int it, const ad::ParamStore& params) {
    ad::save_checkpoint(dir / checkpoint_name(it), make_checkpoint(params, it));
  };
  std::vector<EpisodeTask> dev_tasks;
  if (tc.eval_every > 0) {
    dev_tasks = flatten(tasks_by_match(read_jsonl(data / "dev.jsonl", catalog), tc.shots));
    if (!dev_tasks.empty())
      hooks.dev_score = [&](const ad::ParamStore& params) {
        InferenceFlags flags;
        flags.use_rae = tc.use_rae;
        return evaluate_model(learned_policy(model, params, tc, flags), dev_tasks, catalog).f1;
      };
  }
  const MetaResult result = meta_train(model, theta, train_tasks, tc, hooks);
  ad::save_checkpoint(dir / "model.ckpt", make_checkpoint(result.params, result.iterations));
  write_file(dir / "train.log", log.str());
  out << "trained " << result.iterations << " meta-iterations on " << train_tasks.size() << " matches; wrote "
      << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

int report(const Options& o, const std::string& label, const EvalReport& rep, std::ostream& out) {
  out << format_report_table({{label, rep}});
  if (!o.json_out.empty()) write_file(o.json_out, report_to_json(label, rep) + "\n");
  return kOk;
}

std::vector<EpisodeTask> split_tasks(const Options& o, const Catalog& catalog, int shots) {
  if (o.split != "train" && o.split != "dev" && o.split != "test")
    throw Error(Errc::InvalidConfig, "--split must be train, dev or test");
  return flatten(tasks_by_match(read_jsonl(fs::path(o.data) / (o.split + ".jsonl"), catalog), shots));
}

int cmd_eval(const Options& o, const Catalog& catalog, std::ostream& out) {
  const std::string bytes = read_file(o.checkpoint);
  std::istringstream in(bytes);
  const ad::Checkpoint ckpt = ad::read_checkpoint(in);
  const ModelConfig mc = read_model_metadata(ckpt.metadata);
  TrainConfig tc = read_train_metadata(ckpt.metadata);
  if (o.shots > 0) tc.shots = o.shots;
  const PolicyModel model(catalog, mc);
  if (!model.init_params(0).same_layout(ckpt.params))
    throw Error(Errc::CheckpointFormat, "checkpoint parameters do not match the model configuration and catalog");

  InferenceFlags flags;
  flags.use_rae = !o.no_rae;
  flags.use_gates = !o.no_gates;
  EvalOptions eo;
  eo.multiset = o.multiset;
  eo.fingerprint = {{"checkpoint", hex_digest(bytes)},
                    {"split", o.split},
                    {"shots", std::to_string(tc.shots)},
                    {"rae", flags.use_rae ? "on" : "off"},
                    {"gates", flags.use_gates ? "on" : "off"},
                    {"arity", mc.arity == DecoderArity::Multi ? "multi" : "single"},
                    {"multiset", o.multiset ? "on" : "off"},
                    {"seed", std::to_string(tc.seed)}};
  const auto tasks = split_tasks(o, catalog, tc.shots);
  const EvalReport rep = evaluate_model(learned_policy(model, ckpt.params, tc, flags), tasks, catalog, eo);
  return report(o, o.label.empty() ? "model" : o.label, rep, out);
}

int cmd_baseline(const Options& o, const Catalog& catalog, std::ostream& out) {
  const int shots = o.shots > 0 ? o.shots : TrainConfig{}.shots;
  EvalOptions eo;
  eo.multiset = o.multiset;
  eo.fingerprint = {{"policy", "greedy"},
                    {"split", o.split},
                    {"shots", std::to_string(shots)},
                    {"multiset", o.multiset ? "on" : "off"}};
  const EvalReport rep = evaluate_model(greedy_policy(catalog), split_tasks(o, catalog, shots), catalog, eo);
  return report(o, o.label.empty() ? "greedy" : o.label, rep, out);
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  double worst = 0.0;
  char buf[160];
  for (const auto& c : gradcheck_suite(o.gradcheck_seed)) {
    worst = std::max(worst, c.result.max_rel_error);
    std::snprintf(buf, sizeof buf, "%-32s max_rel_error %.3e  coords %6zu  %s\n", c.name.c_str(),
                  c.result.max_rel_error, c.result.coordinates,
                  c.result.max_rel_error <= o.tolerance ? "ok" : "FAIL");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "overall max_rel_error %.3e (tolerance %.1e)\n", worst, o.tolerance);
  out << buf;
  return worst <= o.tolerance ? kOk : kInternal;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Round-based purchase policy toolkit"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;
  app.add_option("--catalog", o.catalog, "Weapon catalog JSON (default: built-in fixture)")->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Parse, clean and split raw match documents");
  ingest->add_option("--input", o.input, "Directory of match documents")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", o.out, "Output split directory")->required();
  ingest->add_option("--seed", o.seed, "Split shuffle seed")->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Per-category purchase-count histogram");
  stats->add_option("--data", o.data, "Split directory, .jsonl file or raw document directory")
      ->required()
      ->check(CLI::ExistingPath);
  stats->add_option("--out", o.out, "Also write the table here");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic match corpus");
  synth->add_option("--out", o.out, "Output directory for match documents")->required();
  synth->add_option("--seed", o.synth.seed, "Generator seed")->capture_default_str();
  synth->add_option("--matches", o.synth.n_matches, "Number of matches")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--profiles", o.synth.profile_count, "Distinct preference profiles")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--habit", o.synth.habit_strength, "Habit strength in [0, 1]")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));

  auto* embed = app.add_subcommand("pretrain-embed", "Train CBOW action embeddings");
  embed->add_option("--data", o.data, "Split directory or .jsonl file")->required()->check(CLI::ExistingPath);
  embed->add_option("--out", o.out, "Embedding text file")->required();
  embed->add_option("--dim", o.cbow.d_emb, "Embedding width")->capture_default_str()->check(CLI::PositiveNumber);
  embed->add_option("--window", o.cbow.window, "Context window")->capture_default_str()->check(CLI::PositiveNumber);
  embed->add_option("--epochs", o.cbow.epochs, "Full-batch epochs")->capture_default_str()->check(CLI::PositiveNumber);
  embed->add_option("--lr", o.cbow.learning_rate, "Adam learning rate")->capture_default_str();
  embed->add_option("--embed-seed", o.cbow.seed, "Initialization seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "Meta-train the policy");
  train->add_option("--data", o.data, "Split directory written by ingest")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", o.out, "Output directory for checkpoints and the training log")->required();
  train->add_option("--seed", o.train.seed, "Training seed")->capture_default_str();
  train->add_option("--init-seed", o.init_seed, "Parameter initialization seed")->capture_default_str();
  train->add_option("--meta-iterations", o.train.meta_iterations)->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--shots", o.train.shots, "K support rounds per task")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--inner-lr", o.train.inner_lr)->capture_default_str();
  train->add_option("--steps-per-shot", o.train.steps_per_shot)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--meta-step", o.train.meta_step, "Initial epsilon")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  train->add_flag("--no-anneal", o.no_anneal, "Keep epsilon constant");
  train->add_option("--warmup-epochs", o.train.warmup_epochs, "Teacher-forcing epochs before SCST")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train->add_option("--batch-width", o.train.batch_width, "Player tasks per sampled match")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--gate-weight", o.train.gate_weight)->capture_default_str();
  train->add_flag("--detach-gates", o.train.detach_gates, "Stop gate gradients at the encoder");
  train->add_flag("--freeze-embeddings", o.train.freeze_embeddings);
  train->add_flag("--no-rae", o.no_rae, "Replace the history vector by its null vector");
  train->add_flag("--consult-gates", o.train.consult_gates_in_training, "Apply gates during training rollouts");
  train->add_option("--eval-every", o.train.eval_every, "Dev evaluation period (0 = off)")->capture_default_str();
  train->add_option("--patience", o.train.patience, "Dev evaluations without improvement before stopping")
      ->capture_default_str();
  train->add_option("--checkpoint-every", o.train.checkpoint_every)->capture_default_str();
  train->add_option("--embeddings", o.embeddings, "Pretrained embeddings from pretrain-embed")->check(CLI::ExistingFile);
  train->add_option("--arity", o.arity, "Decoder layout")->capture_default_str()->check(CLI::IsMember({"multi", "single"}));
  train->add_option("--d-emb", o.model.d_emb)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--d-h", o.model.d_h)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lstm-hidden", o.model.lstm_hidden)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--gate-hidden", o.model.gate_hidden)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--econ-hidden", o.model.econ_hidden)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--d-c", o.model.d_c)->capture_default_str()->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with few-shot adaptation");
  eval->add_option("--data", o.data, "Split directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--checkpoint", o.checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--split", o.split)->capture_default_str()->check(CLI::IsMember({"train", "dev", "test"}));
  eval->add_option("--shots", o.shots, "Override K")->check(CLI::PositiveNumber);
  eval->add_flag("--no-rae", o.no_rae);
  eval->add_flag("--no-gates", o.no_gates, "Run every decoder regardless of gates");
  eval->add_flag("--multiset", o.multiset, "Count repeated purchases in F1");
  eval->add_option("--json", o.json_out, "Write the report as JSON");
  eval->add_option("--label", o.label, "Row label");

  auto* baseline = app.add_subcommand("baseline", "Evaluate the greedy purchase rule");
  baseline->add_option("--data", o.data, "Split directory")->required()->check(CLI::ExistingDirectory);
  baseline->add_option("--split", o.split)->capture_default_str()->check(CLI::IsMember({"train", "dev", "test"}));
  baseline->add_option("--shots", o.shots, "K (selects the same target rounds as eval)")->check(CLI::PositiveNumber);
  baseline->add_flag("--multiset", o.multiset);
  baseline->add_option("--json", o.json_out);
  baseline->add_option("--label", o.label);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seed", o.gradcheck_seed)->capture_default_str();
  gradcheck->add_option("--tolerance", o.tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    std::unique_ptr<Catalog> holder;
    const Catalog& catalog = load_catalog(o.catalog, holder);
    if (*ingest) return cmd_ingest(o, catalog, out, err);
    if (*stats) return cmd_stats(o, catalog, out);
    if (*synth) return cmd_synth(o, catalog, out);
    if (*embed) return cmd_pretrain_embed(o, catalog, out);
    if (*train) return cmd_train(o, catalog, out);
    if (*eval) return cmd_eval(o, catalog, out);
    if (*baseline) return cmd_baseline(o, catalog, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace roundbuy::cli
