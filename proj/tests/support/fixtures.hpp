#pragma once

#include <string>
#include <vector>

#include "roundbuy/catalog.hpp"
#include "roundbuy/dataset.hpp"
#include "roundbuy/model.hpp"
#include "roundbuy/random.hpp"
#include "roundbuy/state.hpp"

namespace roundbuy::testing {

// pistol 500, rifle 2700, flash 200 (x2), smoke 300, vest 650: ids 0..4.
Catalog small_catalog();

// One gun, one grenade, one equipment item; the smallest catalog that
// exercises every decoder.
Catalog tiny_catalog();

// Random catalog with 1-6 guns, 1-5 grenades and 1-4 equipment items, prices
// on a coarse grid so ties are common, and a small random grenade cap.
Catalog random_catalog(Rng& rng);

// Random valid inventory: each weapon held with probability `p`, counts
// respecting per-item limits and the grenade cap.
Inventory random_inventory(const Catalog& catalog, Rng& rng, double p = 0.2);

// Random policy input with a budget in [0, max_budget] and up to
// `max_history` history rounds.
StateInput random_state(const Catalog& catalog, Rng& rng, Dollars max_budget, int max_history = 3);

// Consistent match with `n_rounds` rounds (indices 1..n) where every player
// buys `label` each round; accounts cover the purchase exactly.
MatchRecord uniform_match(const Catalog& catalog, const std::string& id, int n_rounds,
                          const std::vector<WeaponId>& label);

ModelConfig tiny_model_config(DecoderArity arity = DecoderArity::Multi);

std::string read_file(const std::string& path);

}  // namespace roundbuy::testing
