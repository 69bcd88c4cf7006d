#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>


#include "roundbuy/catalog.hpp"
#include "roundbuy/state.hpp"

namespace roundbuy {

inline constexpr int kMaxRounds = 30;
inline constexpr int kSideSwapRound = 16;

enum class Side { CT, T };
std::string_view to_string(Side s) noexcept;

enum class CapturePoint { RoundStart = 0, BuyEnd = 1, RoundEnd = 2 };
inline constexpr std::array<const char*, 3> kCaptureNames{"round_start", "buy_end", "round_end"};

struct PlayerRoundSnapshot {
  int player_slot = 0;
  Side side = Side::CT;
  Dollars account = 0;
  Dollars cash_spent = 0;
  Inventory weapons;
  Dollars items_value = 0;
  double performance_score = 0.0;
};

using SnapshotSet = std::array<PlayerRoundSnapshot, kPlayersPerMatch>;

struct RoundRecord {
  int round_index = 1;
  // Indexed by CapturePoint, then by player slot.
  std::array<SnapshotSet, 3> snapshots;
  // Canonically ordered purchase label per player slot.
  std::array<ActionSequence, kPlayersPerMatch> labels;

  const PlayerRoundSnapshot& at(CapturePoint cp, std::size_t slot) const {
    return snapshots[static_cast<std::size_t>(cp)][slot];
  }
};

struct MatchRecord {
  std::string match_id;
  std::vector<RoundRecord> rounds;

  // Side of `slot` in the round at position `round_pos` (taken from the
  // round-start snapshot, so the swap at round 16 is data-driven).
  Side side_of(std::size_t round_pos, std::size_t slot) const {
    return rounds[round_pos].at(CapturePoint::RoundStart, slot).side;
  }
};

// --- serialization ---------------------------------------------------------

MatchRecord parse_match(std::string_view json_text, const Catalog& catalog);
// Compact single-line JSON followed by a newline.
std::string serialize_match(const MatchRecord& match);

struct IngestResult {
  std::vector<MatchRecord> matches;
  std::vector<std::filesystem::path> sources;  // parallel to matches
  std::vector<std::string> diagnostics;        // rejected documents
};

// Parses every *.json document under `root` in lexicographic file-name order.
// Schema violations throw; player-count mismatches reject the match and are
// reported in `diagnostics`.
IngestResult ingest_matches(const std::filesystem::path& root, const Catalog& catalog);

// --- cleaning and splitting ------------------------------------------------

enum class RejectReason { InconsistentSpend, NegativeAccount, NegativeSpend, NegativeItemsValue };
std::string_view to_string(RejectReason r) noexcept;

struct Rejection {
  std::string match_id;
  int round_index = 0;
  int player_slot = 0;
  RejectReason reason = RejectReason::InconsistentSpend;
};

struct CleanResult {
  std::vector<MatchRecord> kept;
  std::vector<Rejection> rejections;  // first offending (round, player) per dropped match
};

CleanResult clean_matches(std::vector<MatchRecord> matches, const Catalog& catalog);

struct DatasetSplit {
  std::vector<MatchRecord> train;
  std::vector<MatchRecord> dev;
  std::vector<MatchRecord> test;
};

// Sizes: dev = test = max(1, round(n / 10)), train = the remainder, giving
// 8:1:1 up to rounding (n = 5167 -> 4133 / 517 / 517).
struct SplitSizes {
  std::size_t train = 0, dev = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n);

// Deterministic shuffle under `seed`, then partition by split_sizes.
DatasetSplit split_dataset(std::vector<MatchRecord> matches, std::uint64_t seed);
// Index-level variant: a permutation of [0, n) cut into train/dev/test.
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n, std::uint64_t seed);

// --- labels and tasks ------------------------------------------------------

// Canonical order: Gun < Grenade < Equipment; within a category by descending
// price, then ascending id.
ActionSequence label_sequence(std::vector<WeaponId> purchases, const Catalog& catalog);

bool is_excluded_round(int round_index) noexcept;

struct RoundExample {
  int round_index = 0;
  StateInput state;
  ActionSequence label;
};

struct EpisodeTask {
  std::string match_id;
  int player_slot = 0;
  std::vector<RoundExample> support;
  std::vector<RoundExample> target;
};

// Builds the policy input for `slot` at round position `round_pos`. History
// covers the earlier eligible rounds of the same match.
StateInput make_state(const MatchRecord& match, std::size_t round_pos, std::size_t slot);

// One task per player slot. Matches with fewer than K + 1 eligible rounds are
// skipped: the result is empty and a diagnostic is appended.
std::vector<EpisodeTask> build_tasks(const MatchRecord& match, int shots,
                                     std::vector<std::string>* diagnostics = nullptr);

// --- statistics ------------------------------------------------------------

struct PurchaseCountStats {
  // freq[category][count], count bucket 4 means "4 or more".
  std::array<std::array<double, 5>, 3> freq{};
  std::size_t pairs = 0;  // (player, round) pairs counted
};

PurchaseCountStats purchase_count_stats(const std::vector<MatchRecord>& matches,
                                        const Catalog& catalog);
std::string format_stats_table(const PurchaseCountStats& stats);

}  // namespace roundbuy
