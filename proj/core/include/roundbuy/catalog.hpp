#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace roundbuy {

using Dollars = int;
using WeaponId = int;
// Index into the atomic-action vocabulary: weapon ids first, then End, Start.
using ActionId = int;

enum class Category { Gun = 0, Grenade = 1, Equipment = 2 };
inline constexpr std::array<Category, 3> kCategories{Category::Gun, Category::Grenade,
                                                     Category::Equipment};
inline constexpr std::size_t kCategoryCount = 3;

enum class GunSubtype { Pistol, Shotgun, SMG, Rifle, LMG, Sniper };

std::string_view to_string(Category c) noexcept;
std::string_view to_string(GunSubtype s) noexcept;
Category parse_category(std::string_view text);
GunSubtype parse_gun_subtype(std::string_view text);

struct WeaponSpec {
  WeaponId id = 0;
  std::string name;
  Category category = Category::Gun;
  std::optional<GunSubtype> gun_subtype;
  Dollars price = 0;
  int quantity_limit = 1;
};

// Held counts keyed by weapon id. Iteration is in ascending id order, which is
// the canonical summation order used by the encoders.
class Inventory {
 public:
  Inventory() = default;
  Inventory(std::initializer_list<WeaponId> items) {
    for (auto id : items) add(id);
  }

  int count(WeaponId id) const;
  void add(WeaponId id, int n = 1);
  bool empty() const { return counts_.empty(); }
  int total() const;

  // Held weapons expanded into a sorted id list (duplicates repeated).
  std::vector<WeaponId> items() const;
  const std::map<WeaponId, int>& counts() const { return counts_; }

  bool operator==(const Inventory&) const = default;

 private:
  std::map<WeaponId, int> counts_;
};

class Catalog {
 public:
  static constexpr Dollars kDefaultMaxCash = 16000;
  static constexpr int kDefaultGrenadeCap = 4;

  // Validates ids (unique, contiguous from 0), prices, limits and subtypes.
  explicit Catalog(std::vector<WeaponSpec> weapons, Dollars max_cash = kDefaultMaxCash,
                   int grenade_cap = kDefaultGrenadeCap);

  static Catalog parse(std::string_view json_text);
  static Catalog load(const std::filesystem::path& path);
  // The shipped 44-weapon economy.
  static const Catalog& default_fixture();

  std::string to_json() const;

  std::size_t size() const { return weapons_.size(); }
  const WeaponSpec& at(WeaponId id) const;
  bool contains(WeaponId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  const std::vector<WeaponSpec>& weapons() const { return weapons_; }
  Dollars max_cash() const { return max_cash_; }
  int grenade_cap() const { return grenade_cap_; }
  Dollars max_price() const;
  Dollars price(WeaponId id) const { return at(id).price; }
  Category category(WeaponId id) const { return at(id).category; }

  ActionId end_action() const { return static_cast<ActionId>(size()); }
  ActionId start_action() const { return static_cast<ActionId>(size()) + 1; }
  std::size_t vocab_size() const { return size() + 2; }

  int held_in_category(const Inventory& inv, Category c) const;
  // True iff buying one more `id` respects its quantity limit and, for
  // grenades, the aggregate grenade cap.
  bool within_limits(WeaponId id, const Inventory& inv) const;
  void validate(const Inventory& inv) const;
  Dollars total_price(const std::vector<WeaponId>& items) const;
  Dollars inventory_value(const Inventory& inv) const;

 private:
  std::vector<WeaponSpec> weapons_;
  Dollars max_cash_;
  int grenade_cap_;
};

// Legality over the full atomic-action vocabulary (size catalog.vocab_size()).
// A weapon is legal iff affordable, below its limits and (when filtered) of the
// requested category. End is always legal; Start never is.
std::vector<bool> legal_action_mask(const Catalog& catalog, Dollars cash, const Inventory& inventory,
                                    std::optional<Category> category = std::nullopt);

}  // namespace roundbuy
