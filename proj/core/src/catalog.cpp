#include "roundbuy/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "roundbuy/error.hpp"

namespace roundbuy {

namespace detail {
extern const std::string_view kDefaultCatalogJson;
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Gun: return "gun";
    case Category::Grenade: return "grenade";
    case Category::Equipment: return "equipment";
  }
  return "?";
}

std::string_view to_string(GunSubtype s) noexcept {
  switch (s) {
    case GunSubtype::Pistol: return "pistol";
    case GunSubtype::Shotgun: return "shotgun";
    case GunSubtype::SMG: return "smg";
    case GunSubtype::Rifle: return "rifle";
    case GunSubtype::LMG: return "lmg";
    case GunSubtype::Sniper: return "sniper";
  }
  return "?";
}

Category parse_category(std::string_view text) {
  for (auto c : kCategories)
    if (to_string(c) == text) return c;
  throw Error(Errc::SchemaViolation, "unknown category '" + std::string(text) + "'");
}

GunSubtype parse_gun_subtype(std::string_view text) {
  for (auto s : {GunSubtype::Pistol, GunSubtype::Shotgun, GunSubtype::SMG, GunSubtype::Rifle,
                 GunSubtype::LMG, GunSubtype::Sniper})
    if (to_string(s) == text) return s;
  throw Error(Errc::SchemaViolation, "unknown gun subtype '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Inventory

int Inventory::count(WeaponId id) const {
  auto it = counts_.find(id);
  return it == counts_.end() ? 0 : it->second;
}

void Inventory::add(WeaponId id, int n) {
  if (n == 0) return;
  int& c = counts_[id];
  c += n;
  if (c < 0) throw Error(Errc::InvalidInventory, "negative count for weapon " + std::to_string(id));
  if (c == 0) counts_.erase(id);
}

int Inventory::total() const {
  int t = 0;
  for (const auto& [id, n] : counts_) t += n;
  return t;
}

std::vector<WeaponId> Inventory::items() const {
  std::vector<WeaponId> out;
  for (const auto& [id, n] : counts_) out.insert(out.end(), static_cast<std::size_t>(n), id);
  return out;
}

// ---------------------------------------------------------------------------
// Catalog

Catalog::Catalog(std::vector<WeaponSpec> weapons, Dollars max_cash, int grenade_cap)
    : weapons_(std::move(weapons)), max_cash_(max_cash), grenade_cap_(grenade_cap) {
  if (weapons_.empty()) throw Error(Errc::EmptyCatalog, "catalog has no weapons");
  if (max_cash_ <= 0) throw Error(Errc::InvalidConfig, "max_cash must be positive");
  if (grenade_cap_ < 1) throw Error(Errc::InvalidConfig, "grenade_cap must be positive");

  std::set<WeaponId> seen;
  for (const auto& w : weapons_) {
    if (!seen.insert(w.id).second)
      throw Error(Errc::DuplicateId, "weapon id " + std::to_string(w.id) + " appears twice");
    if (w.price < 0)
      throw Error(Errc::InvalidPrice, "weapon '" + w.name + "' has price " + std::to_string(w.price));
    if (w.quantity_limit < 1)
      throw Error(Errc::InvalidQuantityLimit, "weapon '" + w.name + "' has quantity_limit " +
                                                  std::to_string(w.quantity_limit));
    if ((w.category == Category::Gun) != w.gun_subtype.has_value())
      throw Error(Errc::InvalidSubtype,
                  "weapon '" + w.name + "': gun_subtype must be present iff category is gun");
  }
  std::sort(weapons_.begin(), weapons_.end(),
            [](const WeaponSpec& a, const WeaponSpec& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < weapons_.size(); ++i)
    if (weapons_[i].id != static_cast<WeaponId>(i))
      throw Error(Errc::NonContiguousIds, "weapon ids must be contiguous from 0; missing id " +
                                              std::to_string(i));
}

Catalog Catalog::parse(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("catalog is not valid JSON: ") + e.what());
  }
  auto require = [](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
      throw Error(Errc::SchemaViolation, where + ": missing field '" + key + "'");
    return obj.at(key);
  };
  try {
    std::vector<WeaponSpec> weapons;
    const auto list = require(doc, "weapons", "catalog");
    if (!list.is_array()) throw Error(Errc::SchemaViolation, "catalog: 'weapons' must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& rec = list[i];
      const std::string where = "catalog.weapons[" + std::to_string(i) + "]";
      WeaponSpec w;
      w.id = require(rec, "id", where).get<int>();
      w.name = require(rec, "name", where).get<std::string>();
      w.category = parse_category(require(rec, "category", where).get<std::string>());
      if (rec.contains("gun_subtype") && !rec.at("gun_subtype").is_null())
        w.gun_subtype = parse_gun_subtype(rec.at("gun_subtype").get<std::string>());
      w.price = require(rec, "price", where).get<int>();
      w.quantity_limit = require(rec, "quantity_limit", where).get<int>();
      weapons.push_back(std::move(w));
    }
    const Dollars max_cash = doc.value("max_cash", kDefaultMaxCash);
    const int cap = doc.value("grenade_cap", kDefaultGrenadeCap);
    return Catalog(std::move(weapons), max_cash, cap);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("catalog field has wrong type: ") + e.what());
  }
}

Catalog Catalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open catalog " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const Catalog& Catalog::default_fixture() {
  static const Catalog fixture = parse(detail::kDefaultCatalogJson);
  return fixture;
}

std::string Catalog::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "roundbuy-catalog/1";
  doc["max_cash"] = max_cash_;
  doc["grenade_cap"] = grenade_cap_;
  auto& list = doc["weapons"] = nlohmann::ordered_json::array();
  for (const auto& w : weapons_) {
    nlohmann::ordered_json rec;
    rec["id"] = w.id;
    rec["name"] = w.name;
    rec["category"] = std::string(to_string(w.category));
    rec["gun_subtype"] = w.gun_subtype ? nlohmann::ordered_json(std::string(to_string(*w.gun_subtype)))
                                       : nlohmann::ordered_json(nullptr);
    rec["price"] = w.price;
    rec["quantity_limit"] = w.quantity_limit;
    list.push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

const WeaponSpec& Catalog::at(WeaponId id) const {
  if (!contains(id)) throw Error(Errc::UnknownWeapon, "weapon id " + std::to_string(id));
  return weapons_[static_cast<std::size_t>(id)];
}

Dollars Catalog::max_price() const {
  Dollars m = 0;
  for (const auto& w : weapons_) m = std::max(m, w.price);
  return m;
}

int Catalog::held_in_category(const Inventory& inv, Category c) const {
  int n = 0;
  for (const auto& [id, count] : inv.counts())
    if (at(id).category == c) n += count;
  return n;
}

bool Catalog::within_limits(WeaponId id, const Inventory& inv) const {
  const auto& w = at(id);
  if (inv.count(id) >= w.quantity_limit) return false;
  if (w.category == Category::Grenade && held_in_category(inv, Category::Grenade) >= grenade_cap_)
    return false;
  return true;
}

void Catalog::validate(const Inventory& inv) const {
  for (const auto& [id, count] : inv.counts()) {
    if (!contains(id)) throw Error(Errc::UnknownWeapon, "inventory holds weapon id " + std::to_string(id));
    if (count > at(id).quantity_limit)
      throw Error(Errc::InvalidInventory, "inventory holds " + std::to_string(count) + " of '" +
                                              at(id).name + "'");
  }
}

Dollars Catalog::total_price(const std::vector<WeaponId>& items) const {
  Dollars t = 0;
  for (auto id : items) t += price(id);
  return t;
}

Dollars Catalog::inventory_value(const Inventory& inv) const {
  Dollars t = 0;
  for (const auto& [id, count] : inv.counts()) t += price(id) * count;
  return t;
}

std::vector<bool> legal_action_mask(const Catalog& catalog, Dollars cash, const Inventory& inventory,
                                    std::optional<Category> category) {
  std::vector<bool> mask(catalog.vocab_size(), false);
  const int grenades_held = catalog.held_in_category(inventory, Category::Grenade);
  for (const auto& w : catalog.weapons()) {
    if (category && w.category != *category) continue;
    if (w.price > cash) continue;
    if (inventory.count(w.id) >= w.quantity_limit) continue;
    if (w.category == Category::Grenade && grenades_held >= catalog.grenade_cap()) continue;
    mask[static_cast<std::size_t>(w.id)] = true;
  }
  mask[static_cast<std::size_t>(catalog.end_action())] = true;
  return mask;
}

}  // namespace roundbuy
