#pragma once

#include <array>
#include <vector>

#include "roundbuy/catalog.hpp"

namespace roundbuy {

// Purchases of one round in emission order. The End terminator is implicit:
// `tokens()` materializes it when an explicit action stream is needed.
struct ActionSequence {
  std::vector<WeaponId> purchases;

  std::vector<ActionId> tokens(const Catalog& catalog) const {
    std::vector<ActionId> t(purchases.begin(), purchases.end());
    t.push_back(catalog.end_action());
    return t;
  }

  bool operator==(const ActionSequence&) const = default;
};

struct HistoryEntry {
  Inventory final_weapons;  // after the purchase period
  double performance_score = 0.0;
};

inline constexpr std::size_t kTeamSize = 5;
inline constexpr std::size_t kPlayersPerMatch = 10;

// Everything the policy sees when deciding one player's purchase.
struct StateInput {
  Inventory own_weapons;
  std::array<Inventory, kTeamSize> team_weapons;  // own team, self included
  std::array<Inventory, kTeamSize> opp_weapons;
  // Self first, then teammates, then opponents; each group in slot order.
  std::array<Dollars, kPlayersPerMatch> money{};
  std::vector<HistoryEntry> history;
  Dollars budget = 0;
};

}  // namespace roundbuy
