#include "roundbuy/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "roundbuy/error.hpp"

namespace roundbuy {

namespace {

std::map<WeaponId, int> tally(const std::vector<WeaponId>& items, bool multiset) {
  std::map<WeaponId, int> out;
  for (WeaponId id : items) {
    if (multiset) ++out[id];
    else out[id] = 1;
  }
  return out;
}

double f1_counts(const std::map<WeaponId, int>& pred, const std::map<WeaponId, int>& truth) {
  int np = 0, nt = 0, common = 0;
  for (const auto& [id, n] : pred) np += n;
  for (const auto& [id, n] : truth) nt += n;
  if (np == 0 && nt == 0) return 1.0;
  if (np == 0 || nt == 0) return 0.0;
  for (const auto& [id, n] : pred)
    if (auto it = truth.find(id); it != truth.end()) common += std::min(n, it->second);
  // 2PR / (P + R) with P = common / np and R = common / nt, reduced to one
  // division so that the result is the correctly rounded rational.
  return 2.0 * common / (np + nt);
}

std::vector<WeaponId> restrict_to(const std::vector<WeaponId>& items, const Catalog& catalog, Category c) {
  std::vector<WeaponId> out;
  for (WeaponId id : items)
    if (catalog.category(id) == c) out.push_back(id);
  return out;
}

}  // namespace

double f1_action_set(const ActionSequence& pred, const ActionSequence& truth, bool multiset) {
  return f1_counts(tally(pred.purchases, multiset), tally(truth.purchases, multiset));
}

double f1_category(const ActionSequence& pred, const ActionSequence& truth, const Catalog& catalog, Category category,
                   bool multiset) {
  return f1_counts(tally(restrict_to(pred.purchases, catalog, category), multiset),
                   tally(restrict_to(truth.purchases, catalog, category), multiset));
}

EvalReport evaluate_model(const TaskPolicy& policy, const std::vector<EpisodeTask>& tasks, const Catalog& catalog,
                          const EvalOptions& options) {
  EvalReport report;
  report.fingerprint = options.fingerprint;
  double total = 0.0;
  std::array<double, kCategoryCount> per_category{};
  for (const auto& task : tasks) {
    if (task.target.empty()) continue;
    const RoundPolicy round_policy = policy(task);
    ++report.tasks;
    for (const auto& example : task.target) {
      const ActionSequence pred = round_policy(example);
      total += f1_action_set(pred, example.label, options.multiset);
      for (std::size_t k = 0; k < kCategoryCount; ++k)
        per_category[k] += f1_category(pred, example.label, catalog, kCategories[k], options.multiset);
      ++report.pairs;
    }
  }
  if (report.pairs == 0) throw Error(Errc::EmptyInput, "no target rounds to evaluate");
  const auto n = static_cast<double>(report.pairs);
  report.f1 = total / n;
  for (std::size_t k = 0; k < kCategoryCount; ++k) report.category_f1[k] = per_category[k] / n;
  return report;
}

TaskPolicy oracle_policy() {
  return [](const EpisodeTask&) -> RoundPolicy { return [](const RoundExample& ex) { return ex.label; }; };
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t width = 5;
  for (const auto& [label, r] : rows) width = std::max(width, label.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %10s  %8s  %7s\n", static_cast<int>(width), "Model", "F1",
                "F1-gun", "F1-grenade", "F1-equip", "pairs");
  out += buf;
  for (const auto& [label, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %10.4f  %8.4f  %7zu\n", static_cast<int>(width),
                  label.c_str(), r.f1, r.category_f1[0], r.category_f1[1], r.category_f1[2], r.pairs);
    out += buf;
  }
  return out;
}

std::string report_to_json(const std::string& label, const EvalReport& report) {
  nlohmann::json j;
  j["model"] = label;
  j["f1"] = report.f1;
  j["f1_gun"] = report.category_f1[0];
  j["f1_grenade"] = report.category_f1[1];
  j["f1_equipment"] = report.category_f1[2];
  j["pairs"] = report.pairs;
  j["tasks"] = report.tasks;
  j["fingerprint"] = report.fingerprint;
  return j.dump();
}

}  // namespace roundbuy
