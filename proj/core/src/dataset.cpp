#include "roundbuy/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "roundbuy/error.hpp"
#include "roundbuy/random.hpp"

namespace roundbuy {

using nlohmann::json;

std::string_view to_string(Side s) noexcept { return s == Side::CT ? "CT" : "T"; }

std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::InconsistentSpend: return "InconsistentSpend";
    case RejectReason::NegativeAccount: return "NegativeAccount";
    case RejectReason::NegativeSpend: return "NegativeSpend";
    case RejectReason::NegativeItemsValue: return "NegativeItemsValue";
  }
  return "?";
}

namespace {

class FieldReader {
 public:
  explicit FieldReader(std::string match_id) : match_id_(std::move(match_id)) {}

  [[noreturn]] void fail(Errc code, const std::string& path, const std::string& what) const {
    throw Error(code, "match '" + match_id_ + "' field '" + path + "': " + what);
  }

  const json& get(const json& obj, const char* key, const std::string& path) const {
    if (!obj.is_object() || !obj.contains(key)) fail(Errc::SchemaViolation, path + "." + key, "missing");
    return obj.at(key);
  }

  const json& array(const json& obj, const char* key, const std::string& path) const {
    const json& v = get(obj, key, path);
    if (!v.is_array()) fail(Errc::SchemaViolation, path + "." + key, "expected array");
    return v;
  }

  long long integer(const json& obj, const char* key, const std::string& path) const {
    const json& v = get(obj, key, path);
    if (!v.is_number_integer()) fail(Errc::SchemaViolation, path + "." + key, "expected integer");
    return v.get<long long>();
  }

  double number(const json& obj, const char* key, const std::string& path) const {
    const json& v = get(obj, key, path);
    if (!v.is_number()) fail(Errc::SchemaViolation, path + "." + key, "expected number");
    return v.get<double>();
  }

  std::string string(const json& obj, const char* key, const std::string& path) const {
    const json& v = get(obj, key, path);
    if (!v.is_string()) fail(Errc::SchemaViolation, path + "." + key, "expected string");
    return v.get<std::string>();
  }

  std::vector<WeaponId> weapon_ids(const json& list, const std::string& path,
                                   const Catalog& catalog) const {
    std::vector<WeaponId> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_number_integer())
        fail(Errc::SchemaViolation, path + "[" + std::to_string(i) + "]", "expected weapon id");
      const auto id = list[i].get<long long>();
      if (!catalog.contains(static_cast<WeaponId>(id)))
        fail(Errc::UnknownWeapon, path + "[" + std::to_string(i) + "]",
             "unknown weapon id " + std::to_string(id));
      ids.push_back(static_cast<WeaponId>(id));
    }
    return ids;
  }

 private:
  std::string match_id_;
};

Side parse_side(const FieldReader& r, const std::string& text, const std::string& path) {
  if (text == "CT") return Side::CT;
  if (text == "T") return Side::T;
  r.fail(Errc::SchemaViolation, path, "team must be \"CT\" or \"T\"");
}

MatchRecord parse_document(const json& doc, const Catalog& catalog) {
  std::string id = "<unknown>";
  if (doc.is_object() && doc.contains("match_id") && doc.at("match_id").is_string())
    id = doc.at("match_id").get<std::string>();
  const FieldReader r(id);

  MatchRecord match;
  match.match_id = r.string(doc, "match_id", "");
  const json& rounds = r.array(doc, "rounds", "");
  if (rounds.empty()) r.fail(Errc::SchemaViolation, "rounds", "match has no rounds");
  if (rounds.size() > static_cast<std::size_t>(kMaxRounds))
    r.fail(Errc::SchemaViolation, "rounds", "more than 30 rounds");

  int prev_index = 0;
  for (std::size_t ri = 0; ri < rounds.size(); ++ri) {
    const json& rj = rounds[ri];
    const std::string rpath = "rounds[" + std::to_string(ri) + "]";
    RoundRecord round;
    const auto index = r.integer(rj, "round_index", rpath);
    if (index < 1 || index > kMaxRounds)
      r.fail(Errc::SchemaViolation, rpath + ".round_index", "must lie in [1, 30]");
    if (index <= prev_index)
      r.fail(Errc::SchemaViolation, rpath + ".round_index", "rounds must be strictly increasing");
    round.round_index = static_cast<int>(index);
    prev_index = round.round_index;

    const json& snaps = r.get(rj, "snapshots", rpath);
    for (std::size_t cp = 0; cp < kCaptureNames.size(); ++cp) {
      const std::string spath = rpath + ".snapshots";
      const json& players = r.array(snaps, kCaptureNames[cp], spath);
      const std::string ppath = spath + "." + kCaptureNames[cp];
      if (players.size() != kPlayersPerMatch)
        r.fail(Errc::PlayerCountMismatch, ppath,
               "expected 10 players, found " + std::to_string(players.size()));
      std::array<bool, kPlayersPerMatch> seen{};
      int ct = 0;
      for (std::size_t pi = 0; pi < players.size(); ++pi) {
        const json& pj = players[pi];
        const std::string path = ppath + "[" + std::to_string(pi) + "]";
        const auto slot = r.integer(pj, "player_slot", path);
        if (slot < 0 || slot >= static_cast<long long>(kPlayersPerMatch))
          r.fail(Errc::SchemaViolation, path + ".player_slot", "must lie in [0, 9]");
        if (seen[static_cast<std::size_t>(slot)])
          r.fail(Errc::SchemaViolation, path + ".player_slot", "duplicate slot");
        seen[static_cast<std::size_t>(slot)] = true;

        PlayerRoundSnapshot s;
        s.player_slot = static_cast<int>(slot);
        s.side = parse_side(r, r.string(pj, "team", path), path + ".team");
        ct += s.side == Side::CT ? 1 : 0;
        s.account = static_cast<Dollars>(r.integer(pj, "account", path));
        s.cash_spent = static_cast<Dollars>(r.integer(pj, "cash_spent", path));
        for (auto w : r.weapon_ids(r.array(pj, "weapons", path), path + ".weapons", catalog))
          s.weapons.add(w);
        try {
          catalog.validate(s.weapons);
        } catch (const Error& e) {
          r.fail(Errc::InvalidInventory, path + ".weapons", e.what());
        }
        s.items_value = static_cast<Dollars>(r.integer(pj, "items_value", path));
        s.performance_score = r.number(pj, "performance_score", path);
        if (!(s.performance_score >= 0.0))
          r.fail(Errc::SchemaViolation, path + ".performance_score", "must be nonnegative");
        round.snapshots[cp][static_cast<std::size_t>(slot)] = std::move(s);
      }
      if (ct != static_cast<int>(kTeamSize))
        r.fail(Errc::PlayerCountMismatch, ppath, "expected 5 players per side, found " +
                                                     std::to_string(ct) + " CT");
    }
    for (std::size_t slot = 0; slot < kPlayersPerMatch; ++slot)
      for (auto cp : {CapturePoint::BuyEnd, CapturePoint::RoundEnd})
        if (round.at(cp, slot).side != round.at(CapturePoint::RoundStart, slot).side)
          r.fail(Errc::SchemaViolation, rpath + ".snapshots",
                 "slot " + std::to_string(slot) + " changes side within a round");

    const json& purchases = r.array(rj, "purchases", rpath);
    if (purchases.size() != kPlayersPerMatch)
      r.fail(Errc::PlayerCountMismatch, rpath + ".purchases",
             "expected 10 players, found " + std::to_string(purchases.size()));
    for (std::size_t slot = 0; slot < kPlayersPerMatch; ++slot) {
      const std::string path = rpath + ".purchases[" + std::to_string(slot) + "]";
      if (!purchases[slot].is_array()) r.fail(Errc::SchemaViolation, path, "expected array");
      round.labels[slot] = label_sequence(r.weapon_ids(purchases[slot], path, catalog), catalog);
    }
    match.rounds.push_back(std::move(round));
  }
  return match;
}

json match_to_json(const MatchRecord& match);

}  // namespace

MatchRecord parse_match(std::string_view json_text, const Catalog& catalog) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("document is not valid JSON: ") + e.what());
  }
  return parse_document(doc, catalog);
}

namespace {

json match_to_json(const MatchRecord& match) {
  json doc;
  doc["match_id"] = match.match_id;
  json rounds = json::array();
  for (const auto& round : match.rounds) {
    json rj;
    rj["round_index"] = round.round_index;
    json snaps;
    for (std::size_t cp = 0; cp < kCaptureNames.size(); ++cp) {
      json players = json::array();
      for (const auto& s : round.snapshots[cp]) {
        json pj;
        pj["player_slot"] = s.player_slot;
        pj["team"] = std::string(to_string(s.side));
        pj["account"] = s.account;
        pj["cash_spent"] = s.cash_spent;
        pj["weapons"] = s.weapons.items();
        pj["items_value"] = s.items_value;
        pj["performance_score"] = s.performance_score;
        players.push_back(std::move(pj));
      }
      snaps[kCaptureNames[cp]] = std::move(players);
    }
    rj["snapshots"] = std::move(snaps);
    json purchases = json::array();
    for (const auto& label : round.labels) purchases.push_back(label.purchases);
    rj["purchases"] = std::move(purchases);
    rounds.push_back(std::move(rj));
  }
  doc["rounds"] = std::move(rounds);
  return doc;
}

}  // namespace

std::string serialize_match(const MatchRecord& match) { return match_to_json(match).dump() + "\n"; }

IngestResult ingest_matches(const std::filesystem::path& root, const Catalog& catalog) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(Errc::Io, "dataset root is not a directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  IngestResult result;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::Io, "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      result.matches.push_back(parse_match(ss.str(), catalog));
      result.sources.push_back(file);
    } catch (const Error& e) {
      if (e.code() == Errc::PlayerCountMismatch || e.code() == Errc::InvalidInventory) {
        result.diagnostics.push_back(file.filename().string() + ": rejected: " + e.what());
        continue;
      }
      throw Error(e.code(), file.filename().string() + ": " + e.what());
    }
  }
  return result;
}

CleanResult clean_matches(std::vector<MatchRecord> matches, const Catalog& catalog) {
  CleanResult out;
  for (auto& match : matches) {
    std::optional<Rejection> reject;
    for (const auto& round : match.rounds) {
      for (std::size_t slot = 0; slot < kPlayersPerMatch && !reject; ++slot) {
        auto flag = [&](RejectReason why) {
          reject = Rejection{match.match_id, round.round_index, static_cast<int>(slot), why};
        };
        for (const auto& set : round.snapshots) {
          const auto& s = set[slot];
          if (s.account < 0) flag(RejectReason::NegativeAccount);
          else if (s.cash_spent < 0) flag(RejectReason::NegativeSpend);
          else if (s.items_value < 0) flag(RejectReason::NegativeItemsValue);
          if (reject) break;
        }
        if (reject) break;
        const Dollars spent = round.at(CapturePoint::BuyEnd, slot).cash_spent;
        if (catalog.total_price(round.labels[slot].purchases) != spent)
          flag(RejectReason::InconsistentSpend);
      }
      if (reject) break;
    }
    if (reject) out.rejections.push_back(*reject);
    else out.kept.push_back(std::move(match));
  }
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  if (n < 3) throw Error(Errc::TooFewMatches, "need at least 3 matches to split, got " + std::to_string(n));
  const auto tenth = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0));
  SplitSizes s;
  s.dev = std::max<std::size_t>(1, tenth);
  s.test = s.dev;
  s.train = n - s.dev - s.test;
  return s;
}

std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n, std::uint64_t seed) {
  const SplitSizes sizes = split_sizes(n);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::array<std::vector<std::size_t>, 3> parts;
  parts[0].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  parts[1].assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                  perm.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.dev));
  parts[2].assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.dev), perm.end());
  return parts;
}

DatasetSplit split_dataset(std::vector<MatchRecord> matches, std::uint64_t seed) {
  const auto parts = split_indices(matches.size(), seed);
  DatasetSplit out;
  for (auto i : parts[0]) out.train.push_back(std::move(matches[i]));
  for (auto i : parts[1]) out.dev.push_back(std::move(matches[i]));
  for (auto i : parts[2]) out.test.push_back(std::move(matches[i]));
  return out;
}

ActionSequence label_sequence(std::vector<WeaponId> purchases, const Catalog& catalog) {
  for (auto id : purchases)
    if (!catalog.contains(id)) throw Error(Errc::UnknownWeapon, "purchase of unknown weapon id " + std::to_string(id));
  std::sort(purchases.begin(), purchases.end(), [&](WeaponId a, WeaponId b) {
    const auto& wa = catalog.at(a);
    const auto& wb = catalog.at(b);
    if (wa.category != wb.category) return wa.category < wb.category;
    if (wa.price != wb.price) return wa.price > wb.price;
    return a < b;
  });
  return ActionSequence{std::move(purchases)};
}

bool is_excluded_round(int round_index) noexcept {
  return round_index == 1 || round_index == 2 || round_index == kSideSwapRound ||
         round_index == kSideSwapRound + 1;
}

StateInput make_state(const MatchRecord& match, std::size_t round_pos, std::size_t slot) {
  const RoundRecord& round = match.rounds.at(round_pos);
  const Side own = match.side_of(round_pos, slot);
  StateInput st;
  const auto& me = round.at(CapturePoint::RoundStart, slot);
  st.own_weapons = me.weapons;
  st.budget = me.account;

  std::size_t t = 0, o = 0, m = 1;
  st.money[0] = me.account;
  std::vector<Dollars> opp_money;
  for (std::size_t s = 0; s < kPlayersPerMatch; ++s) {
    const auto& snap = round.at(CapturePoint::RoundStart, s);
    if (snap.side == own) {
      st.team_weapons[t++] = snap.weapons;
      if (s != slot) st.money[m++] = snap.account;
    } else {
      st.opp_weapons[o++] = snap.weapons;
      opp_money.push_back(snap.account);
    }
  }
  for (auto v : opp_money) st.money[m++] = v;

  for (std::size_t p = 0; p < round_pos; ++p) {
    const RoundRecord& past = match.rounds[p];
    if (is_excluded_round(past.round_index)) continue;
    st.history.push_back(HistoryEntry{past.at(CapturePoint::BuyEnd, slot).weapons,
                                      past.at(CapturePoint::RoundEnd, slot).performance_score});
  }
  return st;
}

std::vector<EpisodeTask> build_tasks(const MatchRecord& match, int shots,
                                     std::vector<std::string>* diagnostics) {
  if (shots < 1) throw Error(Errc::InvalidConfig, "shot count K must be >= 1");
  std::vector<std::size_t> eligible;
  for (std::size_t p = 0; p < match.rounds.size(); ++p)
    if (!is_excluded_round(match.rounds[p].round_index)) eligible.push_back(p);
  if (eligible.size() < static_cast<std::size_t>(shots) + 1) {
    if (diagnostics)
      diagnostics->push_back("match '" + match.match_id + "' skipped: " + std::to_string(eligible.size()) +
                             " eligible rounds < K + 1 = " + std::to_string(shots + 1));
    return {};
  }
  std::vector<EpisodeTask> tasks;
  for (std::size_t slot = 0; slot < kPlayersPerMatch; ++slot) {
    EpisodeTask task;
    task.match_id = match.match_id;
    task.player_slot = static_cast<int>(slot);
    for (std::size_t e = 0; e < eligible.size(); ++e) {
      const std::size_t p = eligible[e];
      RoundExample ex{match.rounds[p].round_index, make_state(match, p, slot), match.rounds[p].labels[slot]};
      (e < static_cast<std::size_t>(shots) ? task.support : task.target).push_back(std::move(ex));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

PurchaseCountStats purchase_count_stats(const std::vector<MatchRecord>& matches, const Catalog& catalog) {
  PurchaseCountStats stats;
  std::array<std::array<std::size_t, 5>, 3> counts{};
  for (const auto& match : matches)
    for (const auto& round : match.rounds)
      for (const auto& label : round.labels) {
        std::array<int, 3> per{};
        for (auto id : label.purchases) ++per[static_cast<std::size_t>(catalog.category(id))];
        for (std::size_t c = 0; c < 3; ++c) ++counts[c][static_cast<std::size_t>(std::min(per[c], 4))];
        ++stats.pairs;
      }
  if (stats.pairs == 0) throw Error(Errc::EmptyInput, "no (player, round) pairs to count");
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < 5; ++k)
      stats.freq[c][k] = static_cast<double>(counts[c][k]) / static_cast<double>(stats.pairs);
  return stats;
}

std::string format_stats_table(const PurchaseCountStats& stats) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s | %7s %7s %7s %7s %7s\n", "Type\\Count", "0", "1", "2", "3", "4");
  out += line;
  out += std::string(53, '-') + "\n";
  static constexpr const char* kNames[] = {"Gun", "Grenade", "Equipment"};
  for (std::size_t c = 0; c < 3; ++c) {
    std::snprintf(line, sizeof line, "%-10s | %6.1f%% %6.1f%% %6.1f%% %6.1f%% %6.1f%%\n", kNames[c],
                  100.0 * stats.freq[c][0], 100.0 * stats.freq[c][1], 100.0 * stats.freq[c][2],
                  100.0 * stats.freq[c][3], 100.0 * stats.freq[c][4]);
    out += line;
  }
  std::snprintf(line, sizeof line, "(player, round) pairs: %zu\n", stats.pairs);
  out += line;
  return out;
}

}  // namespace roundbuy
