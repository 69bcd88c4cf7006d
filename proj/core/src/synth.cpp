#include "roundbuy/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "roundbuy/error.hpp"
#include "roundbuy/random.hpp"

namespace roundbuy {

namespace {

struct Profile {
  std::array<std::vector<WeaponId>, 3> order;  // preference per category
};

int draw_count(Rng& rng, const CountDistribution& dist) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += dist[k];
    if (u < acc) return static_cast<int>(k);
  }
  for (std::size_t k = dist.size(); k-- > 0;)
    if (dist[k] > 0.0) return static_cast<int>(k);
  return 0;
}

struct Player {
  std::size_t profile = 0;
  std::array<int, 3> habit{};
  Inventory carried;
};

}  // namespace

std::vector<MatchRecord> synth_matches(const SynthConfig& config, const Catalog& catalog) {
  if (config.n_matches < 1) throw Error(Errc::InvalidConfig, "n_matches must be >= 1");
  if (config.profile_count < 1) throw Error(Errc::InvalidConfig, "profile_count must be >= 1");
  if (config.min_rounds < 1 || config.max_rounds > kMaxRounds || config.min_rounds > config.max_rounds)
    throw Error(Errc::InvalidConfig, "round range must satisfy 1 <= min <= max <= 30");
  if (config.slack_max < 0) throw Error(Errc::InvalidConfig, "slack_max must be >= 0");

  Rng profile_rng(derive_seed(config.seed, {1}));
  std::vector<Profile> profiles(static_cast<std::size_t>(config.profile_count));
  for (auto& p : profiles) {
    for (const auto& w : catalog.weapons()) p.order[static_cast<std::size_t>(w.category)].push_back(w.id);
    for (auto& list : p.order)
      for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[profile_rng.below(i)]);
  }

  std::vector<MatchRecord> matches;
  for (int m = 0; m < config.n_matches; ++m) {
    Rng rng(derive_seed(config.seed, {2, static_cast<std::uint64_t>(m)}));
    MatchRecord match;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05d", m);
    match.match_id = id;

    std::array<Player, kPlayersPerMatch> players;
    for (auto& pl : players) {
      pl.profile = rng.below(profiles.size());
      for (std::size_t c = 1; c < 3; ++c) pl.habit[c] = draw_count(rng, config.count_targets[c]);
    }

    const int n_rounds = static_cast<int>(rng.between(config.min_rounds, config.max_rounds));
    for (int r = 1; r <= n_rounds; ++r) {
      RoundRecord round;
      round.round_index = r;
      for (std::size_t slot = 0; slot < kPlayersPerMatch; ++slot) {
        Player& pl = players[slot];
        if (r == 1 || r == kSideSwapRound) pl.carried = Inventory{};
        const bool first_half = r < kSideSwapRound;
        const Side side = (slot < kTeamSize) == first_half ? Side::CT : Side::T;

        std::array<int, 3> want{};
        want[0] = draw_count(rng, config.count_targets[0]);
        for (std::size_t c = 1; c < 3; ++c)
          want[c] = rng.bernoulli(config.habit_strength) ? pl.habit[c] : draw_count(rng, config.count_targets[c]);

        Inventory inv = pl.carried;
        std::vector<WeaponId> bundle;
        for (std::size_t c = 0; c < 3; ++c) {
          int bought = 0;
          for (WeaponId w : profiles[pl.profile].order[c]) {
            if (bought >= want[c]) break;
            while (bought < want[c] && catalog.within_limits(w, inv)) {
              inv.add(w);
              bundle.push_back(w);
              ++bought;
            }
          }
        }
        const Dollars cost = catalog.total_price(bundle);
        const Dollars account = cost + static_cast<Dollars>(rng.between(0, config.slack_max));
        const double score = 2.0 * static_cast<double>(rng.between(0, 5));
        const bool died = rng.bernoulli(config.death_prob);

        PlayerRoundSnapshot start;
        start.player_slot = static_cast<int>(slot);
        start.side = side;
        start.account = account;
        start.cash_spent = 0;
        start.weapons = pl.carried;
        start.items_value = catalog.inventory_value(start.weapons);

        PlayerRoundSnapshot buy = start;
        buy.account = account - cost;
        buy.cash_spent = cost;
        buy.weapons = inv;
        buy.items_value = catalog.inventory_value(inv);

        PlayerRoundSnapshot end = buy;
        Inventory left;
        if (!died)
          for (const auto& [w, n] : inv.counts())
            if (catalog.category(w) != Category::Grenade) left.add(w, n);
        end.weapons = left;
        end.items_value = catalog.inventory_value(left);
        end.performance_score = score;

        round.snapshots[0][slot] = std::move(start);
        round.snapshots[1][slot] = std::move(buy);
        round.snapshots[2][slot] = std::move(end);
        round.labels[slot] = label_sequence(std::move(bundle), catalog);
        pl.carried = std::move(left);
      }
      match.rounds.push_back(std::move(round));
    }
    matches.push_back(std::move(match));
  }
  return matches;
}

}  // namespace roundbuy
