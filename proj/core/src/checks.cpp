#include "roundbuy/checks.hpp"

#include <array>
#include <functional>

#include "roundbuy/model.hpp"
#include "roundbuy/random.hpp"
#include "roundbuy/training.hpp"

namespace roundbuy {

using ad::Graph;
using ad::ParamStore;
using ad::Tensor;
using ad::Var;

namespace {

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

// Contracts a matrix to a scalar with fixed random weights so that every
// element of the checked op's output influences the loss differently.
Var contract(Graph& g, Var x, std::uint64_t seed) {
  Rng rng(seed);
  const Var left = g.constant(random_tensor(rng, 1, x.rows()));
  const Var right = g.constant(random_tensor(rng, x.cols(), 1));
  return ad::matmul(ad::matmul(left, x), right);
}

StateInput small_state(const Catalog& catalog, Rng& rng) {
  const auto random_inventory = [&](int max_items) {
    Inventory inv;
    const auto n = rng.between(0, max_items);
    for (long long i = 0; i < n; ++i) {
      const auto id = static_cast<WeaponId>(rng.below(catalog.size()));
      if (catalog.within_limits(id, inv)) inv.add(id);
    }
    return inv;
  };
  StateInput s;
  for (auto& inv : s.team_weapons) inv = random_inventory(3);
  for (auto& inv : s.opp_weapons) inv = random_inventory(3);
  s.team_weapons[0] = Inventory{2};
  s.own_weapons = s.team_weapons[0];
  for (auto& m : s.money) m = static_cast<Dollars>(rng.between(0, catalog.max_cash()));
  for (int r = 0; r < 3; ++r) s.history.push_back({random_inventory(3), static_cast<double>(rng.between(0, 10))});
  s.budget = 4000;
  s.money[0] = s.budget;
  return s;
}

}  // namespace

std::vector<NamedGradCheck> gradcheck_suite(std::uint64_t seed) {
  std::vector<NamedGradCheck> out;
  Rng rng(seed);
  ParamStore p;
  p.add("a", random_tensor(rng, 3, 4));
  p.add("b", random_tensor(rng, 4, 2));
  p.add("c", random_tensor(rng, 3, 4));
  p.add("col", random_tensor(rng, 3, 1));
  p.add("w", random_tensor(rng, 1, 4));
  p.add("lstm.W", random_tensor(rng, 12, 5, 0.5));
  p.add("lstm.b", random_tensor(rng, 12, 1, 0.5));
  p.add("x", random_tensor(rng, 2, 1));
  p.add("h", random_tensor(rng, 3, 1));
  p.add("cell", random_tensor(rng, 3, 1));
  p.add("logits", random_tensor(rng, 6, 1));

  const auto check = [&](const std::string& name, const std::vector<std::string>& params,
                         const std::function<Var(Graph&)>& f) {
    out.push_back({name, ad::grad_check(f, p, params)});
  };

  check("matmul", {"a", "b"}, [](Graph& g) { return contract(g, ad::matmul(g.param("a"), g.param("b")), 1); });
  check("add", {"a", "c"}, [](Graph& g) { return contract(g, ad::add(g.param("a"), g.param("c")), 2); });
  check("add_broadcast", {"a", "col"},
        [](Graph& g) { return contract(g, ad::add(g.param("a"), g.param("col")), 3); });
  check("scale", {"a"}, [](Graph& g) { return contract(g, ad::scale(g.param("a"), -1.7), 4); });
  check("concat_rows", {"a", "c"}, [](Graph& g) {
    const std::array<Var, 2> parts{g.param("a"), g.param("c")};
    return contract(g, ad::concat_rows(parts), 5);
  });
  check("concat_cols", {"a", "col"}, [](Graph& g) {
    const std::array<Var, 2> parts{g.param("a"), g.param("col")};
    return contract(g, ad::concat_cols(parts), 6);
  });
  check("tanh", {"a"}, [](Graph& g) { return contract(g, ad::tanh(g.param("a")), 7); });
  check("relu", {"a"}, [](Graph& g) { return contract(g, ad::relu(g.param("a")), 8); });
  check("sigmoid", {"a"}, [](Graph& g) { return contract(g, ad::sigmoid(g.param("a")), 9); });
  check("softmax", {"w"}, [](Graph& g) { return contract(g, ad::softmax(g.param("w")), 10); });
  check("weighted_sum", {"a", "w"},
        [](Graph& g) { return contract(g, ad::weighted_sum(g.param("a"), g.param("w")), 11); });
  check("embedding", {"a"}, [](Graph& g) { return contract(g, ad::embedding(g.param("a"), 1), 12); });
  check("slice", {"a"}, [](Graph& g) { return contract(g, ad::slice(g.param("a"), 2, 5), 13); });
  check("sum", {"a"}, [](Graph& g) {
    const std::array<Var, 3> parts{contract(g, g.param("a"), 14), contract(g, g.param("a"), 15),
                                   contract(g, ad::tanh(g.param("a")), 16)};
    return ad::sum(parts);
  });
  check("lstm_cell", {"lstm.W", "lstm.b", "x", "h", "cell"}, [](Graph& g) {
    const auto o = ad::lstm_cell(g.param("lstm.W"), g.param("lstm.b"), g.param("x"), g.param("h"), g.param("cell"));
    return ad::add(contract(g, o.h, 17), contract(g, o.c, 18));
  });
  check("masked_log_prob", {"logits"}, [](Graph& g) {
    const std::vector<bool> mask{true, false, true, true, false, true};
    return ad::masked_log_prob(g.param("logits"), mask, 3);
  });
  check("bce_with_logits", {"logits"}, [](Graph& g) {
    const std::array<double, 6> targets{1, 0, 1, 1, 0, 0};
    return ad::bce_with_logits(g.param("logits"), targets);
  });

  // Composed losses on a small model. Rollouts are drawn once and frozen.
  const Catalog& catalog = Catalog::default_fixture();
  for (DecoderArity arity : {DecoderArity::Multi, DecoderArity::Single}) {
    ModelConfig cfg;
    cfg.d_emb = 4;
    cfg.d_h = 6;
    cfg.lstm_hidden = 4;
    cfg.gate_hidden = 3;
    cfg.econ_hidden = 4;
    cfg.d_c = 3;
    cfg.arity = arity;
    const PolicyModel model(catalog, cfg);
    const ParamStore params = model.init_params(derive_seed(seed, {static_cast<std::uint64_t>(arity)}));
    const StateInput state = small_state(catalog, rng);
    const ActionSequence label{{23, 37, 35, 43}};
    ActionSequence sample, greedy;
    {
      Graph g(params);
      const Var h = model.state_repr(g, state);
      Rng draw(derive_seed(seed, {99}));
      auto terms = scst_loss(g, model, h, state, label, draw);
      sample = terms.sample;
      greedy = terms.greedy;
      // Guarantees a nonzero advantage so that the SCST term is exercised.
      if (f1_action_set(sample, label) == f1_action_set(greedy, label)) sample = label;
    }
    const std::string suffix = arity == DecoderArity::Multi ? "" : "_single";
    out.push_back({"state_repr+scst+gate" + suffix, ad::grad_check(
                                                         [&](Graph& g) {
                                                           const Var h = model.state_repr(g, state);
                                                           const std::array<Var, 2> parts{
                                                               scst_loss_frozen(g, model, h, state, label, sample,
                                                                                greedy),
                                                               gate_loss(g, model, h, label)};
                                                           return ad::sum(parts);
                                                         },
                                                         params)});
    out.push_back({"state_repr+mle" + suffix, ad::grad_check(
                                                  [&](Graph& g) {
                                                    const Var h = model.state_repr(g, state);
                                                    return mle_warmup_loss(g, model, h, state, label);
                                                  },
                                                  params)});
  }
  return out;
}

}  // namespace roundbuy
