#include "roundbuy/baseline.hpp"

#include "roundbuy/error.hpp"

namespace roundbuy {

namespace {

// Most expensive weapon of `category` that is affordable and within limits;
// -1 if none. Scanning ids upward with a strict comparison keeps the lowest
// id among equal prices.
WeaponId best_affordable(const Catalog& catalog, Category category, Dollars cash, const Inventory& inventory,
                         bool only_unheld) {
  WeaponId best = -1;
  for (const auto& w : catalog.weapons()) {
    if (w.category != category || w.price > cash || !catalog.within_limits(w.id, inventory)) continue;
    if (only_unheld && inventory.count(w.id) > 0) continue;
    if (best < 0 || w.price > catalog.price(best)) best = w.id;
  }
  return best;
}

}  // namespace

ActionSequence greedy_purchase(const Catalog& catalog, Dollars cash, const Inventory& inventory) {
  if (cash < 0) throw Error(Errc::InvalidConfig, "negative cash");
  ActionSequence seq;
  Inventory inv = inventory;
  const auto buy = [&](WeaponId id) {
    seq.purchases.push_back(id);
    cash -= catalog.price(id);
    inv.add(id);
  };

  if (WeaponId gun = best_affordable(catalog, Category::Gun, cash, inv, false); gun >= 0) buy(gun);
  for (WeaponId g; (g = best_affordable(catalog, Category::Grenade, cash, inv, false)) >= 0;) buy(g);
  for (WeaponId e; (e = best_affordable(catalog, Category::Equipment, cash, inv, true)) >= 0;) buy(e);
  return seq;
}

TaskPolicy greedy_policy(const Catalog& catalog) {
  return [&catalog](const EpisodeTask&) -> RoundPolicy {
    return [&catalog](const RoundExample& ex) {
      return greedy_purchase(catalog, ex.state.budget, ex.state.own_weapons);
    };
  };
}

}  // namespace roundbuy
