#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace roundbuy::testing {

namespace {

// True if a ranks above b: higher price, then lower id.
bool item_before(const Catalog& catalog, WeaponId a, WeaponId b) {
  if (catalog.price(a) != catalog.price(b)) return catalog.price(a) > catalog.price(b);
  return a < b;
}

bool sequence_better(const Catalog& catalog, const std::vector<WeaponId>& a, const std::vector<WeaponId>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] == b[i]) continue;
    return item_before(catalog, a[i], b[i]);
  }
  return a.size() > b.size();
}

// Best sequence of `category` purchases, searched exhaustively. `only_unheld`
// forbids buying an item already in the inventory; `max_len` bounds depth.
std::vector<WeaponId> best_phase(const Catalog& catalog, Category category, Dollars cash, const Inventory& start,
                                 bool only_unheld, int max_len) {
  std::vector<WeaponId> best, current;
  std::function<void(Dollars, Inventory&)> dfs = [&](Dollars left, Inventory& inv) {
    if (sequence_better(catalog, current, best)) best = current;
    if (static_cast<int>(current.size()) == max_len) return;
    for (const auto& w : catalog.weapons()) {
      if (w.category != category) continue;
      if (only_unheld && inv.count(w.id) > 0) continue;
      if (!legal_purchase(catalog, w.id, left, inv)) continue;
      current.push_back(w.id);
      Inventory next = inv;
      next.add(w.id);
      dfs(left - w.price, next);
      current.pop_back();
    }
  };
  Inventory inv = start;
  dfs(cash, inv);
  return best;
}

}  // namespace

bool legal_purchase(const Catalog& catalog, WeaponId id, Dollars cash, const Inventory& inventory) {
  const auto& w = catalog.at(id);
  if (w.price > cash) return false;
  if (inventory.count(id) >= w.quantity_limit) return false;
  if (w.category == Category::Grenade) {
    int grenades = 0;
    for (const auto& [held, n] : inventory.counts())
      if (catalog.category(held) == Category::Grenade) grenades += n;
    if (grenades >= catalog.grenade_cap()) return false;
  }
  return true;
}

ActionSequence greedy_oracle(const Catalog& catalog, Dollars cash, const Inventory& inventory) {
  ActionSequence out;
  Inventory inv = inventory;
  const auto apply = [&](const std::vector<WeaponId>& items) {
    for (WeaponId id : items) {
      out.purchases.push_back(id);
      cash -= catalog.price(id);
      inv.add(id);
    }
  };
  apply(best_phase(catalog, Category::Gun, cash, inv, false, 1));
  apply(best_phase(catalog, Category::Grenade, cash, inv, false, catalog.grenade_cap()));
  int equipment = 0;
  for (const auto& w : catalog.weapons()) equipment += w.category == Category::Equipment;
  apply(best_phase(catalog, Category::Equipment, cash, inv, true, equipment));
  return out;
}

double SetF1::value() const {
  if (pred == 0 && truth == 0) return 1.0;
  if (pred == 0 || truth == 0) return 0.0;
  return 2.0 * static_cast<double>(common) / static_cast<double>(pred + truth);
}

SetF1 set_f1(const std::set<int>& pred, const std::set<int>& truth) {
  std::vector<int> both;
  std::set_intersection(pred.begin(), pred.end(), truth.begin(), truth.end(), std::back_inserter(both));
  return {pred.size(), truth.size(), both.size()};
}

std::vector<double> attention_reference(const std::vector<std::vector<double>>& items,
                                        const std::vector<std::vector<double>>& W, const std::vector<double>& b,
                                        const std::vector<double>& v, std::vector<double>* alpha_out) {
  const std::size_t d = b.size();
  std::vector<double> scores;
  for (const auto& x : items) {
    double s = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double u = b[r];
      for (std::size_t c = 0; c < x.size(); ++c) u += W[r][c] * x[c];
      s += v[r] * std::tanh(u);
    }
    scores.push_back(s);
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) z += (s = std::exp(s - mx));
  std::vector<double> out(items.front().size(), 0.0);
  for (std::size_t t = 0; t < items.size(); ++t) {
    scores[t] /= z;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += scores[t] * items[t][c];
  }
  if (alpha_out) *alpha_out = scores;
  return out;
}

}  // namespace roundbuy::testing
