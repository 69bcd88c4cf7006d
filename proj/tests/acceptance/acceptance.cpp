// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 when
// any criterion fails. Thresholds and probe settings are pinned below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "roundbuy/baseline.hpp"
#include "roundbuy/checks.hpp"
#include "roundbuy/dataset.hpp"
#include "roundbuy/evaluation.hpp"
#include "roundbuy/synth.hpp"
#include "roundbuy/training.hpp"

namespace fs = std::filesystem;
namespace rb = roundbuy;
namespace ad = roundbuy::ad;
namespace rt = roundbuy::testing;

namespace {

// C1
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 120.0;
// C2, C3, C4
constexpr int kGreedyCases = 1000;
constexpr int kMetricCases = 1000;
constexpr int kMetricVocabMax = 10;
constexpr int kMaskGenerations = 10000;
// C5: one synthetic match, a fresh initialization per player, cycling the
// five support rounds; teacher forcing first, then SCST.
constexpr double kTrainF1 = 0.95;
constexpr int kTrainSteps = 500;
constexpr int kTrainWarmupSteps = 50;
constexpr double kTrainLr = 3e-3;
constexpr double kTrainSeconds = 300.0;
// C6: 25 synthetic matches, 20 for meta-training (200 tasks), 5 held out (50 tasks).
constexpr double kFewShotMargin = 0.10;
constexpr int kFewShotIterations = 60;
constexpr double kFewShotSeconds = 1800.0;
// C7: a narrower model so that ten training runs stay affordable.
constexpr int kAblationSeeds = 5;
constexpr int kAblationIterations = 40;
constexpr double kAblationNoiseSe = 2.0;  // allowed drop, in standard errors of the paired difference
// C9
constexpr double kPublicGreedyF1 = 0.2612;
constexpr double kPublicGreedyTol = 0.05;
constexpr double kPublicCellTol = 0.01;
constexpr std::array<std::array<double, 5>, 3> kPublicCounts{{
    {0.359, 0.616, 0.024, 0.001, 0.0},
    {0.194, 0.126, 0.146, 0.164, 0.370},
    {0.383, 0.503, 0.107, 0.007, 0.0},
}};

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

rb::ModelConfig scaled_config(int d) {
  rb::ModelConfig mc;
  mc.d_emb = d;
  mc.d_h = 2 * d;
  mc.lstm_hidden = 2 * d;
  mc.gate_hidden = d;
  mc.econ_hidden = d;
  mc.d_c = d / 2;
  return mc;
}

struct FewShotSplit {
  std::vector<std::vector<rb::EpisodeTask>> train;
  std::vector<rb::EpisodeTask> test;
};

FewShotSplit preference_corpus(std::uint64_t seed) {
  rb::SynthConfig sc;
  sc.n_matches = 25;
  sc.seed = seed;
  const auto matches = rb::synth_matches(sc, rb::Catalog::default_fixture());
  FewShotSplit s;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    auto tasks = rb::build_tasks(matches[i], 5);
    if (i < 20) s.train.push_back(std::move(tasks));
    else s.test.insert(s.test.end(), tasks.begin(), tasks.end());
  }
  return s;
}

Outcome c1_gradients() {
  Clock clock;
  double worst = 0.0;
  std::string worst_name;
  bool composed = false;
  for (const auto& c : rb::gradcheck_suite()) {
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      worst_name = c.name;
    }
    composed = composed || c.name.find("scst") != std::string::npos;
  }
  const double t = clock.seconds();
  return verdict(composed && worst <= kGradTolerance && t < kGradSeconds,
                 fmt("max relative error %.2e (%s) <= %.0e, composed scst check %s, %.1f s", worst,
                     worst_name.c_str(), kGradTolerance, composed ? "present" : "MISSING", t));
}

Outcome c2_greedy_oracle() {
  rb::Rng rng(20240601);
  int mismatches = 0;
  for (int t = 0; t < kGreedyCases; ++t) {
    const auto catalog = t % 2 == 0 ? rt::random_catalog(rng) : rb::Catalog::default_fixture();
    const auto inv = rt::random_inventory(catalog, rng, 0.2);
    const auto cash = static_cast<rb::Dollars>(rng.between(0, t % 2 == 0 ? 6000 : 16000));
    if (rb::greedy_purchase(catalog, cash, inv) != rt::greedy_oracle(catalog, cash, inv)) ++mismatches;
  }
  return verdict(mismatches == 0, fmt("%d / %d states differ from the exhaustive rule", mismatches, kGreedyCases));
}

Outcome c3_metric_oracle() {
  rb::Rng rng(20240602);
  int mismatches = 0;
  for (int t = 0; t < kMetricCases; ++t) {
    const auto vocab = static_cast<int>(rng.between(1, kMetricVocabMax));
    rb::ActionSequence a, b;
    std::set<int> sa, sb;
    for (auto [seq, set] : {std::pair{&a, &sa}, std::pair{&b, &sb}}) {
      const auto n = rng.between(0, 8);
      for (int i = 0; i < n; ++i) {
        const auto id = static_cast<int>(rng.between(0, vocab - 1));
        seq->purchases.push_back(id);
        set->insert(id);
      }
    }
    if (rb::f1_action_set(a, b) != rt::set_f1(sa, sb).value()) ++mismatches;
  }
  return verdict(mismatches == 0, fmt("%d / %d pairs differ from set arithmetic", mismatches, kMetricCases));
}

Outcome c4_mask_soundness() {
  rb::Rng rng(20240603);
  int budget = 0, quantity = 0;
  for (int t = 0; t < kMaskGenerations; ++t) {
    const auto catalog = t % 2 == 0 ? rt::random_catalog(rng) : rb::Catalog::default_fixture();
    const auto arity = t % 4 < 2 ? rb::DecoderArity::Multi : rb::DecoderArity::Single;
    const rb::PolicyModel model(catalog, rt::tiny_model_config(arity));
    auto params = model.init_params(rng.next_u64());
    // Sharper random distributions make illegal picks likelier if a mask leaks.
    const double scale = rng.uniform(1.0, 6.0);
    for (auto& [name, tensor] : params)
      for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] *= scale;
    const auto state = rt::random_state(catalog, rng, t % 2 == 0 ? 5000 : 16000);
    const auto mode = rng.bernoulli(0.75) ? rb::DecodeMode::Sample : rb::DecodeMode::Greedy;
    const auto seq = model.generate_purchase(params, state, mode, rng.next_u64(), {true, rng.bernoulli(0.5)});
    rb::Dollars cash = state.budget;
    rb::Inventory inv = state.own_weapons;
    for (auto id : seq.purchases) {
      if (catalog.price(id) > cash) ++budget;
      else if (!rt::legal_purchase(catalog, id, cash, inv)) ++quantity;
      cash -= catalog.price(id);
      inv.add(id);
    }
  }
  return verdict(budget == 0 && quantity == 0, fmt("%d budget and %d quantity violations in %d generations", budget,
                                                   quantity, kMaskGenerations));
}

Outcome c5_trainability() {
  Clock clock;
  const auto& catalog = rb::Catalog::default_fixture();
  rb::SynthConfig sc;
  sc.n_matches = 1;
  const auto tasks = rb::build_tasks(rb::synth_matches(sc, catalog).front(), 5);
  const rb::PolicyModel model(catalog, {});
  const auto theta = model.init_params(1);
  rb::TrainConfig tc;
  tc.inner_lr = kTrainLr;

  double sum = 0.0, worst = 1.0;
  for (const auto& task : tasks) {
    ad::ParamStore params = theta;
    auto opt = ad::OptimizerState::adam(kTrainLr);
    for (int step = 0; step < kTrainSteps; ++step) {
      const auto& ex = task.support[static_cast<std::size_t>(step) % task.support.size()];
      const auto phase = step < kTrainWarmupSteps ? rb::Phase::Warmup : rb::Phase::Scst;
      auto g = rb::round_gradient(model, params, ex, phase, tc, rb::derive_seed(3, {static_cast<std::uint64_t>(step)}));
      ad::adam_step(params, g.grads, opt);
    }
    double f1 = 0.0;
    for (const auto& ex : task.support)
      f1 += rb::f1_action_set(model.generate_purchase(params, ex.state, rb::DecodeMode::Greedy, 0), ex.label);
    f1 /= static_cast<double>(task.support.size());
    sum += f1;
    worst = std::min(worst, f1);
  }
  const double mean = sum / static_cast<double>(tasks.size());
  const double t = clock.seconds();
  return verdict(tasks.size() == 10 && mean >= kTrainF1 && t < kTrainSeconds,
                 fmt("mean support F1 %.4f >= %.2f over %zu tasks (worst %.4f) after %d steps, %.1f s", mean,
                     kTrainF1, tasks.size(), worst, kTrainSteps, t));
}

Outcome c6_few_shot() {
  Clock clock;
  const auto& catalog = rb::Catalog::default_fixture();
  const auto split = preference_corpus(101);
  std::size_t n_train = 0;
  for (const auto& m : split.train) n_train += m.size();
  const rb::PolicyModel model(catalog, {});
  const auto theta = model.init_params(1);
  rb::TrainConfig tc;
  tc.meta_iterations = kFewShotIterations;
  const rb::InferenceFlags flags;
  const auto before = rb::evaluate_model(rb::learned_policy(model, theta, tc, flags), split.test, catalog);
  const auto trained = rb::meta_train(model, theta, split.train, tc);
  const auto after = rb::evaluate_model(rb::learned_policy(model, trained.params, tc, flags), split.test, catalog);
  const double margin = after.f1 - before.f1;
  const double t = clock.seconds();
  return verdict(n_train == 200 && split.test.size() == 50 && margin >= kFewShotMargin && t < kFewShotSeconds,
                 fmt("meta-init %.4f vs random-init %.4f after 5-shot adaptation, margin %.4f >= %.2f "
                     "(%zu train / %zu test tasks), %.1f s",
                     after.f1, before.f1, margin, kFewShotMargin, n_train, split.test.size(), t));
}

Outcome c7_rae_ablation() {
  Clock clock;
  const auto& catalog = rb::Catalog::default_fixture();
  const rb::PolicyModel model(catalog, scaled_config(16));
  std::vector<double> diffs;
  std::string runs;
  for (int s = 1; s <= kAblationSeeds; ++s) {
    const auto split = preference_corpus(100 + static_cast<std::uint64_t>(s));
    const auto theta = model.init_params(static_cast<std::uint64_t>(s));
    double f1[2];
    for (int rae = 0; rae < 2; ++rae) {
      rb::TrainConfig tc;
      tc.meta_iterations = kAblationIterations;
      tc.use_rae = rae == 1;
      tc.seed = static_cast<std::uint64_t>(s);
      rb::InferenceFlags flags;
      flags.use_rae = tc.use_rae;
      const auto trained = rb::meta_train(model, theta, split.train, tc);
      f1[rae] = rb::evaluate_model(rb::learned_policy(model, trained.params, tc, flags), split.test, catalog).f1;
    }
    diffs.push_back(f1[1] - f1[0]);
    runs += fmt(" %+.3f", f1[1] - f1[0]);
  }
  const double n = static_cast<double>(diffs.size());
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  const auto wins = std::count_if(diffs.begin(), diffs.end(), [](double d) { return d > 0.0; });
  return verdict(mean >= -kAblationNoiseSe * se,
                 fmt("RAE on minus off: mean %+.4f (se %.4f, floor %+.4f), on ahead in %d/%d seeds [%s ], %.1f s",
                     mean, se, -kAblationNoiseSe * se, static_cast<int>(wins), kAblationSeeds, runs.c_str() + 1,
                     clock.seconds()));
}

int tool(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = std::string(ROUNDBUY_TOOL) + " " + args + " >" + stdout_file.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every regular file under `a` has a byte-identical counterpart under `b`, and
// the two trees list the same files.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<fs::path> ra, rb_;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) ra.insert(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rb_.insert(fs::relative(e.path(), b));
  if (ra != rb_ || ra.empty()) {
    why = "file lists differ under " + a.filename().string();
    return false;
  }
  for (const auto& rel : ra)
    if (rt::read_file((a / rel).string()) != rt::read_file((b / rel).string())) {
      why = (a.filename() / rel).string() + " differs";
      return false;
    }
  return true;
}

Outcome c8_determinism() {
  Clock clock;
  const fs::path root = fs::temp_directory_path() / "roundbuy_acceptance_c8";
  fs::remove_all(root);
  std::string why;
  int compared = 0;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string D = d.string();
    const std::vector<std::pair<std::string, std::string>> steps{
        {"synth", "synth --out " + D + "/raw --matches 12 --seed 5"},
        {"ingest", "ingest --input " + D + "/raw --out " + D + "/split"},
        {"pretrain-embed", "pretrain-embed --data " + D + "/split --out " + D + "/emb/emb.txt --epochs 30"},
        {"train", "train --data " + D + "/split --out " + D + "/run --meta-iterations 4 --checkpoint-every 2 "
                  "--eval-every 2 --embeddings " + D + "/emb/emb.txt"},
        {"eval", "eval --data " + D + "/split --checkpoint " + D + "/run/model.ckpt --split test --json " + D +
                     "/eval/report.json"},
    };
    fs::create_directories(d / "stdout");
    for (const auto& [name, args] : steps)
      if (tool(args, d / "stdout" / (name + ".txt")) != 0) return verdict(false, "`" + name + "` failed in run " + run);
  }
  // Paths differ between the runs only in stdout; artifacts must match exactly.
  for (const char* sub : {"raw", "split", "emb", "run", "eval"}) {
    if (!same_tree(root / "a" / sub, root / "b" / sub, why)) return verdict(false, why);
    for (const auto& e : fs::recursive_directory_iterator(root / "a" / sub)) compared += e.is_regular_file();
  }
  if (rt::read_file((root / "a/stdout/eval.txt").string()) != rt::read_file((root / "b/stdout/eval.txt").string()))
    return verdict(false, "eval report table differs");
  fs::remove_all(root);
  return verdict(true, fmt("synth, ingest, pretrain-embed, train, eval: %d artifacts byte-identical across two runs, "
                           "%.1f s",
                           compared, clock.seconds()));
}

Outcome c9_public_data() {
  const char* env = std::getenv("ROUNDBUY_PUBLIC_DATA");
  if (!env || !fs::is_directory(env))
    return {Status::Skip, "set ROUNDBUY_PUBLIC_DATA to a directory of released match documents to run"};
  const char* catalog_env = std::getenv("ROUNDBUY_PUBLIC_CATALOG");
  const rb::Catalog catalog = catalog_env ? rb::Catalog::load(catalog_env) : rb::Catalog::default_fixture();
  auto cleaned = rb::clean_matches(rb::ingest_matches(env, catalog).matches, catalog);
  if (cleaned.kept.empty()) return verdict(false, "no usable matches");
  const auto stats = rb::purchase_count_stats(cleaned.kept, catalog);
  double worst_cell = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < 5; ++k) worst_cell = std::max(worst_cell, std::abs(stats.freq[c][k] - kPublicCounts[c][k]));
  const auto split = rb::split_dataset(std::move(cleaned.kept), 2024);
  std::vector<rb::EpisodeTask> tasks;
  for (const auto& m : split.test) {
    auto t = rb::build_tasks(m, 5);
    tasks.insert(tasks.end(), t.begin(), t.end());
  }
  const double f1 = rb::evaluate_model(rb::greedy_policy(catalog), tasks, catalog).f1;
  return verdict(std::abs(f1 - kPublicGreedyF1) <= kPublicGreedyTol && worst_cell <= kPublicCellTol,
                 fmt("greedy F1 %.4f (reference %.4f +- %.2f), worst histogram cell off by %.3f (<= %.2f)", f1,
                     kPublicGreedyF1, kPublicGreedyTol, worst_cell, kPublicCellTol));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", c1_gradients},     {"greedy oracle equivalence", c2_greedy_oracle},
      {"metric oracle equivalence", c3_metric_oracle}, {"mask soundness", c4_mask_soundness},
      {"trainability probe", c5_trainability},    {"few-shot benefit probe", c6_few_shot},
      {"RAE ablation direction", c7_rae_ablation}, {"determinism", c8_determinism},
      {"public data reproduction", c9_public_data},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    failed += o.status == Status::Fail;
    std::cout << "criterion " << i + 1 << " " << tag << "  " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
