#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "roundbuy/catalog.hpp"
#include "roundbuy/dataset.hpp"

namespace roundbuy {

// Purchase-count targets per category over counts {0, 1, 2, 3, 4}.
using CountDistribution = std::array<double, 5>;

struct SynthConfig {
  std::uint64_t seed = 7;
  int n_matches = 20;
  // Distinct latent weapon-preference profiles shared across players.
  int profile_count = 4;
  // Defaults match per-round purchase counts seen in professional play.
  std::array<CountDistribution, 3> count_targets{{
      {0.359, 0.616, 0.024, 0.001, 0.0},
      {0.194, 0.126, 0.146, 0.164, 0.370},
      {0.383, 0.503, 0.107, 0.007, 0.0},
  }};
  // Probability that a player's grenade / equipment count equals their
  // habitual count instead of a fresh draw.
  double habit_strength = 0.8;
  // Unspent money left on top of the intended bundle, uniform in [0, slack_max].
  Dollars slack_max = 150;
  int min_rounds = 16;
  int max_rounds = 30;
  double death_prob = 0.5;
};

// Deterministic under config.seed. Each player holds a fixed preference order
// per category; labels buy the first legal preferred items up to the round's
// drawn counts, and the round-start account covers exactly that bundle plus
// slack, so every match passes clean_matches.
std::vector<MatchRecord> synth_matches(const SynthConfig& config, const Catalog& catalog);

}  // namespace roundbuy
