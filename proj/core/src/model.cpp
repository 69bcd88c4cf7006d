#include "roundbuy/model.hpp"

#include <algorithm>
#include <cmath>

#include "roundbuy/embeddings.hpp"
#include "roundbuy/error.hpp"

namespace roundbuy {

using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

constexpr const char* kWeaponEncoder = "weapon_enc";
constexpr const char* kTeamEncoder = "team_enc";

int parse_positive(const std::map<std::string, std::string>& meta, const std::string& key, int fallback) {
  auto it = meta.find(key);
  if (it == meta.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size() || v <= 0) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::CheckpointFormat, "metadata '" + key + "' is not a positive integer: " + it->second);
  }
}

std::vector<bool> only_end(std::size_t vocab, ActionId end) {
  std::vector<bool> m(vocab, false);
  m[static_cast<std::size_t>(end)] = true;
  return m;
}

int legal_count(const std::vector<bool>& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

ActionId pick_greedy(const Tensor& logits, const std::vector<bool>& mask) {
  ActionId best = -1;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && (best < 0 || logits[i] > logits[static_cast<std::size_t>(best)])) best = static_cast<ActionId>(i);
  return best;
}

ActionId pick_sample(const Tensor& logits, const std::vector<bool>& mask, Rng& rng) {
  const auto probs = ad::masked_softmax_values(logits, mask);
  const double u = rng.uniform();
  double cum = 0.0;
  ActionId last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    last = static_cast<ActionId>(i);
    cum += probs[i];
    if (u < cum) return last;
  }
  return last;  // rounding left u above the final cumulative sum
}

// Lexicographic order on expanded item lists; fixes the pooling order of a
// team so that the result does not depend on slot assignment.
std::vector<const Inventory*> canonical_order(std::span<const Inventory> team) {
  std::vector<const Inventory*> order;
  for (const auto& inv : team) order.push_back(&inv);
  std::stable_sort(order.begin(), order.end(),
                   [](const Inventory* a, const Inventory* b) { return a->items() < b->items(); });
  return order;
}

}  // namespace

void write_model_metadata(const ModelConfig& c, std::map<std::string, std::string>& meta) {
  meta["model.d_emb"] = std::to_string(c.d_emb);
  meta["model.d_h"] = std::to_string(c.d_h);
  meta["model.lstm_hidden"] = std::to_string(c.lstm_hidden);
  meta["model.gate_hidden"] = std::to_string(c.gate_hidden);
  meta["model.econ_hidden"] = std::to_string(c.econ_hidden);
  meta["model.d_c"] = std::to_string(c.d_c);
  meta["model.arity"] = c.arity == DecoderArity::Multi ? "multi" : "single";
}

ModelConfig read_model_metadata(const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  c.d_emb = parse_positive(meta, "model.d_emb", c.d_emb);
  c.d_h = parse_positive(meta, "model.d_h", c.d_h);
  c.lstm_hidden = parse_positive(meta, "model.lstm_hidden", c.lstm_hidden);
  c.gate_hidden = parse_positive(meta, "model.gate_hidden", c.gate_hidden);
  c.econ_hidden = parse_positive(meta, "model.econ_hidden", c.econ_hidden);
  c.d_c = parse_positive(meta, "model.d_c", c.d_c);
  if (auto it = meta.find("model.arity"); it != meta.end()) {
    if (it->second == "multi") c.arity = DecoderArity::Multi;
    else if (it->second == "single") c.arity = DecoderArity::Single;
    else throw Error(Errc::CheckpointFormat, "unknown decoder arity '" + it->second + "'");
  }
  return c;
}

PolicyModel::PolicyModel(const Catalog& catalog, ModelConfig config) : catalog_(&catalog), config_(config) {
  for (int d : {config.d_emb, config.d_h, config.lstm_hidden, config.gate_hidden, config.econ_hidden, config.d_c})
    if (d <= 0) throw Error(Errc::InvalidConfig, "model dimensions must be positive");
}

std::string PolicyModel::decoder_name(std::size_t decoder) const {
  if (config_.arity == DecoderArity::Single) return "all";
  return std::string(to_string(kCategories.at(decoder)));
}

ad::ParamStore PolicyModel::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  ad::ParamStore p;
  const auto xavier = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = rng.uniform(-limit, limit);
    p.add(name, std::move(t));
  };
  const auto normal = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = 0.1 * rng.normal();
    p.add(name, std::move(t));
  };
  const auto zeros = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    p.add(name, Tensor(rows, cols));
  };

  const auto d = static_cast<std::size_t>(config_.d_emb);
  const auto dh = static_cast<std::size_t>(config_.d_h);
  const auto hl = static_cast<std::size_t>(config_.lstm_hidden);
  const auto gh = static_cast<std::size_t>(config_.gate_hidden);
  const auto eh = static_cast<std::size_t>(config_.econ_hidden);
  const auto dc = static_cast<std::size_t>(config_.d_c);
  const std::size_t vocab = catalog_->vocab_size();

  xavier(kEmbeddingParam, vocab, d);
  for (const char* enc : {kWeaponEncoder, kTeamEncoder}) {
    const std::string e(enc);
    xavier(e + ".W", d, d);
    zeros(e + ".b", d, 1);
    normal(e + ".v", 1, d);
    normal(e + ".null", d, 1);
  }
  normal("rae.null", d, 1);
  xavier("econ.W1", eh, kPlayersPerMatch);
  zeros("econ.b1", eh, 1);
  xavier("econ.W2", dc, eh);
  zeros("econ.b2", dc, 1);
  xavier("state.W1", dh, 4 * d + dc);
  xavier("state.W2", dh, dh);
  for (Category c : kCategories) {
    const std::string gname = "gate." + std::string(to_string(c));
    xavier(gname + ".W1", gh, dh);
    zeros(gname + ".b1", gh, 1);
    xavier(gname + ".W2", 1, gh);
    zeros(gname + ".b2", 1, 1);
  }
  for (std::size_t k = 0; k < decoder_count(); ++k) {
    const std::string prefix = "dec." + decoder_name(k);
    xavier(prefix + ".init.W", hl, dh);
    zeros(prefix + ".init.b", hl, 1);
    xavier(prefix + ".lstm.W", 4 * hl, d + hl);
    zeros(prefix + ".lstm.b", 4 * hl, 1);
    xavier(prefix + ".out.W1", hl, hl);
    xavier(prefix + ".out.W2", vocab, hl);
  }
  return p;
}

Var PolicyModel::attention_pool(Graph& g, std::span<const Var> items, const std::string& encoder) const {
  if (items.empty()) throw Error(Errc::EmptyInput, "attention_pool over no items");
  const Var X = items.size() == 1 ? items.front() : ad::concat_cols(items);
  const Var U = ad::tanh(ad::add(ad::matmul(g.param(encoder + ".W"), X), g.param(encoder + ".b")));
  const Var alpha = ad::softmax(ad::matmul(g.param(encoder + ".v"), U));
  return ad::weighted_sum(X, alpha);
}

Var PolicyModel::player_repr(Graph& g, const Inventory& inventory) const {
  const std::string enc(kWeaponEncoder);
  if (inventory.empty()) return g.param(enc + ".null");
  const Var table = g.param(kEmbeddingParam);
  std::vector<Var> items;
  for (WeaponId id : inventory.items()) items.push_back(ad::embedding(table, id));
  return attention_pool(g, items, enc);
}

Var PolicyModel::team_repr(Graph& g, std::span<const Inventory> team) const {
  if (team.empty()) return g.param(std::string(kTeamEncoder) + ".null");
  std::vector<Var> players;
  for (const Inventory* inv : canonical_order(team)) players.push_back(player_repr(g, *inv));
  return attention_pool(g, players, kTeamEncoder);
}

Var PolicyModel::round_attr_encode(Graph& g, const std::vector<HistoryEntry>& history) const {
  if (history.empty()) return g.param("rae.null");
  double total = 0.0;
  for (const auto& h : history) {
    if (!(h.performance_score >= 0.0) || !std::isfinite(h.performance_score))
      throw Error(Errc::SchemaViolation, "performance score must be finite and nonnegative");
    total += h.performance_score;
  }
  std::vector<double> weights;
  std::vector<Var> pooled;
  for (const auto& h : history) {
    weights.push_back(total > 0.0 ? h.performance_score / total : 1.0 / static_cast<double>(history.size()));
    pooled.push_back(player_repr(g, h.final_weapons));
  }
  const Var X = pooled.size() == 1 ? pooled.front() : ad::concat_cols(pooled);
  return ad::weighted_sum(X, g.constant_column(weights));
}

Var PolicyModel::economy_encode(Graph& g, std::span<const Dollars> money) const {
  if (money.size() != kPlayersPerMatch)
    throw Error(Errc::WrongArity, "economy input needs " + std::to_string(kPlayersPerMatch) + " money values, got " +
                                      std::to_string(money.size()));
  std::vector<double> x;
  const double scale = 1.0 / static_cast<double>(catalog_->max_cash());
  for (Dollars m : money) x.push_back(static_cast<double>(m) * scale);
  const Var hidden = ad::relu(ad::add(ad::matmul(g.param("econ.W1"), g.constant_column(x)), g.param("econ.b1")));
  return ad::add(ad::matmul(g.param("econ.W2"), hidden), g.param("econ.b2"));
}

Var PolicyModel::state_repr(Graph& g, const StateInput& state, bool use_rae) const {
  const Var ps = player_repr(g, state.own_weapons);
  const Var za = team_repr(g, state.team_weapons);
  const Var ze = team_repr(g, state.opp_weapons);
  const Var hr = use_rae ? round_attr_encode(g, state.history) : g.param("rae.null");
  const Var hc = economy_encode(g, state.money);
  const std::array<Var, 5> parts{ps, za, ze, hr, hc};
  const Var hidden = ad::relu(ad::matmul(g.param("state.W1"), ad::concat_rows(parts)));
  return ad::matmul(g.param("state.W2"), hidden);
}

Var PolicyModel::gate_logits(Graph& g, Var h) const {
  std::array<Var, kCategoryCount> logits;
  for (std::size_t k = 0; k < kCategoryCount; ++k) {
    const std::string name = "gate." + std::string(to_string(kCategories[k]));
    const Var hidden = ad::relu(ad::add(ad::matmul(g.param(name + ".W1"), h), g.param(name + ".b1")));
    logits[k] = ad::add(ad::matmul(g.param(name + ".W2"), hidden), g.param(name + ".b2"));
  }
  return ad::concat_rows(logits);
}

CategoryFlags PolicyModel::gate_decisions(std::span<const double> probabilities) {
  if (probabilities.size() != kCategoryCount) throw Error(Errc::WrongArity, "expected three gate probabilities");
  CategoryFlags run{};
  for (std::size_t k = 0; k < kCategoryCount; ++k) run[k] = probabilities[k] >= kGateThreshold;
  return run;
}

std::vector<bool> PolicyModel::step_mask(std::size_t decoder, Dollars cash, const Inventory& inventory,
                                         const std::array<int, kCategoryCount>& segment_counts, int last_category,
                                         const CategoryFlags& allowed) const {
  const Catalog& cat = *catalog_;
  if (config_.arity == DecoderArity::Multi) {
    if (segment_counts.at(decoder) >= kMaxSegmentPurchases) return only_end(cat.vocab_size(), cat.end_action());
    return legal_action_mask(cat, cash, inventory, kCategories.at(decoder));
  }
  auto mask = legal_action_mask(cat, cash, inventory);
  for (std::size_t id = 0; id < cat.size(); ++id) {
    if (!mask[id]) continue;
    const int c = static_cast<int>(cat.category(static_cast<WeaponId>(id)));
    if (!allowed[static_cast<std::size_t>(c)] || c < last_category ||
        segment_counts[static_cast<std::size_t>(c)] >= kMaxSegmentPurchases)
      mask[id] = false;
  }
  return mask;
}

PolicyModel::DecoderState PolicyModel::init_decoder(Graph& g, Var state_h, std::size_t decoder) const {
  const std::string prefix = "dec." + decoder_name(decoder);
  DecoderState st;
  st.h = ad::add(ad::matmul(g.param(prefix + ".init.W"), state_h), g.param(prefix + ".init.b"));
  st.c = g.constant(Tensor(static_cast<std::size_t>(config_.lstm_hidden), 1));
  return st;
}

Var PolicyModel::step_logits(Graph& g, DecoderState& st, std::size_t decoder, ActionId input) const {
  const std::string prefix = "dec." + decoder_name(decoder);
  const Var x = ad::embedding(g.param(kEmbeddingParam), input);
  const auto out = ad::lstm_cell(g.param(prefix + ".lstm.W"), g.param(prefix + ".lstm.b"), x, st.h, st.c);
  st.h = out.h;
  st.c = out.c;
  const Var hidden = ad::relu(ad::matmul(g.param(prefix + ".out.W1"), st.h));
  return ad::matmul(g.param(prefix + ".out.W2"), hidden);
}

DecodeResult PolicyModel::decode_sequence(Graph& g, Var h, std::size_t decoder, Dollars budget, Inventory inventory,
                                          DecodeMode mode, Rng* rng, const CategoryFlags& allowed,
                                          bool record_log_probs) const {
  if (budget < 0) throw Error(Errc::InvalidConfig, "negative budget");
  if (decoder >= decoder_count()) throw Error(Errc::InvalidConfig, "no decoder " + std::to_string(decoder));
  if (mode == DecodeMode::Sample && rng == nullptr) throw Error(Errc::InvalidConfig, "sampling needs a generator");
  const Catalog& cat = *catalog_;
  DecodeResult res;
  std::array<int, kCategoryCount> counts{};
  int last_category = -1;
  Dollars cash = budget;
  DecoderState st;
  bool started = false;
  ActionId input = cat.start_action();
  while (true) {
    const auto mask = step_mask(decoder, cash, inventory, counts, last_category, allowed);
    if (legal_count(mask) == 1) break;  // only End remains
    if (!started) {
      st = init_decoder(g, h, decoder);
      started = true;
    }
    const Var logits = step_logits(g, st, decoder, input);
    const ActionId a = mode == DecodeMode::Greedy ? pick_greedy(logits.value(), mask) : pick_sample(logits.value(), mask, *rng);
    if (record_log_probs) res.step_log_probs.push_back(ad::masked_log_prob(logits, mask, a));
    if (a == cat.end_action()) break;
    res.purchases.push_back(a);
    cash -= cat.price(a);
    res.spent += cat.price(a);
    inventory.add(a);
    last_category = static_cast<int>(cat.category(a));
    ++counts[static_cast<std::size_t>(last_category)];
    input = a;
  }
  res.inventory = std::move(inventory);
  return res;
}

Generation PolicyModel::generate(Graph& g, Var h, const StateInput& state, DecodeMode mode, Rng* rng,
                                 const CategoryFlags& run, bool record_log_probs) const {
  Generation out;
  Dollars budget = state.budget;
  Inventory inventory = state.own_weapons;
  const auto absorb = [&](DecodeResult&& r) {
    out.sequence.purchases.insert(out.sequence.purchases.end(), r.purchases.begin(), r.purchases.end());
    out.step_log_probs.insert(out.step_log_probs.end(), r.step_log_probs.begin(), r.step_log_probs.end());
    out.spent += r.spent;
    budget -= r.spent;
    inventory = std::move(r.inventory);
  };
  if (config_.arity == DecoderArity::Multi) {
    for (std::size_t k = 0; k < kCategoryCount; ++k)
      if (run[k]) absorb(decode_sequence(g, h, k, budget, inventory, mode, rng, kAllCategories, record_log_probs));
  } else if (std::any_of(run.begin(), run.end(), [](bool b) { return b; })) {
    absorb(decode_sequence(g, h, 0, budget, inventory, mode, rng, run, record_log_probs));
  }
  return out;
}

Var PolicyModel::sequence_log_prob(Graph& g, Var h, const StateInput& state, const std::vector<WeaponId>& purchases,
                                   const CategoryFlags& run, bool skip_illegal) const {
  const Catalog& cat = *catalog_;
  std::vector<Var> terms;
  Dollars cash = state.budget;
  Inventory inventory = state.own_weapons;

  const auto force_segment = [&](std::size_t decoder, const std::vector<WeaponId>& segment,
                                 const CategoryFlags& allowed) {
    std::array<int, kCategoryCount> counts{};
    int last_category = -1;
    DecoderState st;
    bool started = false;
    ActionId input = cat.start_action();
    std::vector<ActionId> targets(segment.begin(), segment.end());
    targets.push_back(cat.end_action());
    for (ActionId target : targets) {
      const auto mask = step_mask(decoder, cash, inventory, counts, last_category, allowed);
      const bool forced = legal_count(mask) == 1;
      if (target == cat.end_action()) {
        if (forced) break;
      } else if (!cat.contains(target) || !mask[static_cast<std::size_t>(target)]) {
        if (skip_illegal) continue;
        throw Error(Errc::InvalidInventory, "purchase " + std::to_string(target) + " is illegal at its step");
      }
      if (!started) {
        st = init_decoder(g, h, decoder);
        started = true;
      }
      const Var logits = step_logits(g, st, decoder, input);
      terms.push_back(ad::masked_log_prob(logits, mask, target));
      if (target == cat.end_action()) break;
      cash -= cat.price(target);
      inventory.add(target);
      last_category = static_cast<int>(cat.category(target));
      ++counts[static_cast<std::size_t>(last_category)];
      input = target;
    }
  };

  if (config_.arity == DecoderArity::Multi) {
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      if (!run[k]) continue;
      std::vector<WeaponId> segment;
      for (WeaponId id : purchases)
        if (cat.contains(id) && cat.category(id) == kCategories[k]) segment.push_back(id);
      force_segment(k, segment, kAllCategories);
    }
  } else if (std::any_of(run.begin(), run.end(), [](bool b) { return b; })) {
    std::vector<WeaponId> segment;
    for (WeaponId id : purchases)
      if (!cat.contains(id) || run[static_cast<std::size_t>(cat.category(id))]) segment.push_back(id);
    force_segment(0, segment, run);
  }
  if (terms.empty()) return g.scalar(0.0);
  return ad::sum(terms);
}

std::array<double, kCategoryCount> PolicyModel::gate_forward(const ad::ParamStore& params, const StateInput& state,
                                                             bool use_rae) const {
  Graph g(params);
  ad::NoGradGuard no_grad(g);
  const Var probs = ad::sigmoid(gate_logits(g, state_repr(g, state, use_rae)));
  std::array<double, kCategoryCount> out{};
  for (std::size_t k = 0; k < kCategoryCount; ++k) out[k] = probs.value()[k];
  return out;
}

ActionSequence PolicyModel::generate_purchase(const ad::ParamStore& params, const StateInput& state, DecodeMode mode,
                                              std::uint64_t seed, InferenceFlags flags) const {
  Graph g(params);
  ad::NoGradGuard no_grad(g);
  const Var h = state_repr(g, state, flags.use_rae);
  CategoryFlags run = kAllCategories;
  if (flags.use_gates) {
    const Var probs = ad::sigmoid(gate_logits(g, h));
    const std::array<double, kCategoryCount> p{probs.value()[0], probs.value()[1], probs.value()[2]};
    run = gate_decisions(p);
  }
  Rng rng(seed);
  return generate(g, h, state, mode, &rng, run, false).sequence;
}

}  // namespace roundbuy
