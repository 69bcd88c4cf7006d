#include "fixtures.hpp"

#include <fstream>
#include <sstream>

namespace roundbuy::testing {

namespace {

WeaponSpec spec(WeaponId id, std::string name, Category c, Dollars price, int limit = 1) {
  WeaponSpec w;
  w.id = id;
  w.name = std::move(name);
  w.category = c;
  if (c == Category::Gun) w.gun_subtype = GunSubtype::Rifle;
  w.price = price;
  w.quantity_limit = limit;
  return w;
}

}  // namespace

Catalog small_catalog() {
  std::vector<WeaponSpec> ws{spec(0, "pistol", Category::Gun, 500), spec(1, "rifle", Category::Gun, 2700),
                             spec(2, "flash", Category::Grenade, 200, 2), spec(3, "smoke", Category::Grenade, 300),
                             spec(4, "vest", Category::Equipment, 650)};
  ws[0].gun_subtype = GunSubtype::Pistol;
  return Catalog(std::move(ws), 16000, 4);
}

Catalog tiny_catalog() {
  return Catalog({spec(0, "gun", Category::Gun, 1000), spec(1, "nade", Category::Grenade, 300, 2),
                  spec(2, "kit", Category::Equipment, 400)},
                 4000, 2);
}

Catalog random_catalog(Rng& rng) {
  std::vector<WeaponSpec> ws;
  const auto add = [&](Category c, int n, Dollars step, int max_limit) {
    for (int i = 0; i < n; ++i) {
      const auto id = static_cast<WeaponId>(ws.size());
      ws.push_back(spec(id, "w" + std::to_string(id), c, static_cast<Dollars>(rng.between(0, 12) * step),
                        static_cast<int>(rng.between(1, max_limit))));
    }
  };
  add(Category::Gun, static_cast<int>(rng.between(1, 6)), 250, 1);
  add(Category::Grenade, static_cast<int>(rng.between(1, 5)), 50, 2);
  add(Category::Equipment, static_cast<int>(rng.between(1, 4)), 100, 1);
  return Catalog(std::move(ws), 16000, static_cast<int>(rng.between(1, 4)));
}

Inventory random_inventory(const Catalog& catalog, Rng& rng, double p) {
  Inventory inv;
  for (const auto& w : catalog.weapons())
    for (int k = 0; k < w.quantity_limit; ++k)
      if (rng.bernoulli(p) && catalog.within_limits(w.id, inv)) inv.add(w.id);
  return inv;
}

StateInput random_state(const Catalog& catalog, Rng& rng, Dollars max_budget, int max_history) {
  StateInput s;
  s.own_weapons = random_inventory(catalog, rng);
  s.team_weapons[0] = s.own_weapons;
  for (std::size_t i = 1; i < kTeamSize; ++i) s.team_weapons[i] = random_inventory(catalog, rng);
  for (auto& inv : s.opp_weapons) inv = random_inventory(catalog, rng);
  s.budget = static_cast<Dollars>(rng.between(0, max_budget));
  s.money[0] = s.budget;
  for (std::size_t i = 1; i < kPlayersPerMatch; ++i)
    s.money[i] = static_cast<Dollars>(rng.between(0, catalog.max_cash()));
  const auto n_hist = rng.between(0, max_history);
  for (long long r = 0; r < n_hist; ++r)
    s.history.push_back({random_inventory(catalog, rng, 0.3), static_cast<double>(rng.between(0, 3))});
  return s;
}

MatchRecord uniform_match(const Catalog& catalog, const std::string& id, int n_rounds,
                          const std::vector<WeaponId>& label) {
  MatchRecord m;
  m.match_id = id;
  const Dollars cost = catalog.total_price(label);
  for (int r = 1; r <= n_rounds; ++r) {
    RoundRecord round;
    round.round_index = r;
    for (std::size_t slot = 0; slot < kPlayersPerMatch; ++slot) {
      const bool first_half = r < kSideSwapRound;
      const Side side = (slot < kTeamSize) == first_half ? Side::CT : Side::T;
      for (std::size_t cp = 0; cp < 3; ++cp) {
        auto& s = round.snapshots[cp][slot];
        s.player_slot = static_cast<int>(slot);
        s.side = side;
        s.account = cp == 0 ? cost + 100 : 100;
        s.cash_spent = cp == 0 ? 0 : cost;
        if (cp > 0)
          for (WeaponId w : label) s.weapons.add(w);
        s.items_value = catalog.inventory_value(s.weapons);
        s.performance_score = cp == 2 ? static_cast<double>((slot + r) % 4) : 0.0;
      }
      round.labels[slot] = label_sequence(label, catalog);
    }
    m.rounds.push_back(std::move(round));
  }
  return m;
}

ModelConfig tiny_model_config(DecoderArity arity) {
  ModelConfig c;
  c.d_emb = 4;
  c.d_h = 6;
  c.lstm_hidden = 5;
  c.gate_hidden = 3;
  c.econ_hidden = 4;
  c.d_c = 3;
  c.arity = arity;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace roundbuy::testing
