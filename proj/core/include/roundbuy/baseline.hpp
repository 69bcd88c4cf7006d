#pragma once

#include "roundbuy/catalog.hpp"
#include "roundbuy/evaluation.hpp"
#include "roundbuy/state.hpp"

namespace roundbuy {

// Training-free policy: the most expensive affordable gun (at most one), then
// the most expensive affordable grenade until the cap or the money runs out,
// then every affordable equipment item not yet held, most expensive first.
// Ties go to the lower id.
ActionSequence greedy_purchase(const Catalog& catalog, Dollars cash, const Inventory& inventory);

// The greedy rule as an evaluation policy (no adaptation).
TaskPolicy greedy_policy(const Catalog& catalog);

}  // namespace roundbuy
