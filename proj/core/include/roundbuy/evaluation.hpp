#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "roundbuy/catalog.hpp"
#include "roundbuy/dataset.hpp"
#include "roundbuy/state.hpp"

namespace roundbuy {

// F1 between the purchase sets of two sequences (End never counts). Both
// empty is 1, exactly one empty is 0. With `multiset`, repeated purchases
// count with multiplicity.
double f1_action_set(const ActionSequence& pred, const ActionSequence& truth, bool multiset = false);

// The same F1 after dropping every purchase outside `category`.
double f1_category(const ActionSequence& pred, const ActionSequence& truth, const Catalog& catalog,
                   Category category, bool multiset = false);

struct EvalReport {
  double f1 = 0.0;
  std::array<double, kCategoryCount> category_f1{};
  std::size_t pairs = 0;  // evaluated (player, round) pairs
  std::size_t tasks = 0;
  std::map<std::string, std::string> fingerprint;
};

// Produces the purchase for one target round. Policies other than the oracle
// read only `example.state`.
using RoundPolicy = std::function<ActionSequence(const RoundExample& example)>;
// Builds a round policy for a task; learned policies adapt on the support set here.
using TaskPolicy = std::function<RoundPolicy(const EpisodeTask&)>;

struct EvalOptions {
  bool multiset = false;
  std::map<std::string, std::string> fingerprint;
};

// Mean F1 over every target round of every task. Throws Error(EmptyInput)
// when there is nothing to evaluate.
EvalReport evaluate_model(const TaskPolicy& policy, const std::vector<EpisodeTask>& tasks, const Catalog& catalog,
                          const EvalOptions& options = {});

// Replays the ground truth; used to sanity-check the harness.
TaskPolicy oracle_policy();

// Fixed-width table with one row per (label, report).
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);
// Single-line JSON record of one report.
std::string report_to_json(const std::string& label, const EvalReport& report);

}  // namespace roundbuy
