#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "roundbuy/autodiff.hpp"
#include "roundbuy/error.hpp"
#include "roundbuy/model.hpp"

namespace rb = roundbuy;
namespace ad = roundbuy::ad;
namespace rt = roundbuy::testing;
using ad::Graph;
using ad::Tensor;
using ad::Var;

namespace {

void zero_all(ad::ParamStore& p, const std::string& prefix) {
  for (auto& [name, t] : p)
    if (name.rfind(prefix, 0) == 0) std::fill(t.values().begin(), t.values().end(), 0.0);
}

std::vector<double> values_of(Var v) { return {v.value().values().begin(), v.value().values().end()}; }

bool sound(const rb::Catalog& c, const rb::StateInput& s, const rb::ActionSequence& seq) {
  rb::Inventory inv = s.own_weapons;
  rb::Dollars spent = 0;
  for (auto id : seq.purchases) {
    if (!rt::legal_purchase(c, id, s.budget - spent, inv)) return false;
    spent += c.price(id);
    inv.add(id);
  }
  return spent <= s.budget;
}

}  // namespace

class ModelTest : public ::testing::Test {
 protected:
  rb::Catalog catalog = rt::tiny_catalog();
  rb::PolicyModel model{catalog, rt::tiny_model_config()};
  ad::ParamStore params = model.init_params(3);
};

TEST_F(ModelTest, ParameterLayout) {
  const auto& cfg = model.config();
  EXPECT_EQ(params.at("embed.actions").rows(), catalog.vocab_size());
  EXPECT_EQ(params.at("embed.actions").cols(), static_cast<std::size_t>(cfg.d_emb));
  EXPECT_EQ(params.at("weapon_enc.v").rows(), 1u);
  EXPECT_EQ(params.at("state.W1").cols(), static_cast<std::size_t>(4 * cfg.d_emb + cfg.d_c));
  EXPECT_EQ(params.at("econ.W1").cols(), 10u);
  EXPECT_EQ(params.at("dec.grenade.lstm.W").rows(), static_cast<std::size_t>(4 * cfg.lstm_hidden));
  EXPECT_TRUE(params.contains("gate.equipment.b2"));
  EXPECT_FALSE(params.contains("state.b1"));
  EXPECT_EQ(model.init_params(3), params);
  EXPECT_NE(model.init_params(4), params);
  for (const auto& [name, t] : params)
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0)
      for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
}

TEST_F(ModelTest, MetadataRoundTrip) {
  std::map<std::string, std::string> meta;
  auto cfg = rt::tiny_model_config(rb::DecoderArity::Single);
  rb::write_model_metadata(cfg, meta);
  EXPECT_EQ(meta.at("model.arity"), "single");
  EXPECT_EQ(rb::read_model_metadata(meta), cfg);
}

TEST_F(ModelTest, AttentionSingleAndIdenticalItems) {
  Graph g(params);
  const Var x = g.constant(Tensor::column({0.3, -1.2, 0.7, 2.0}));
  const Var one[] = {x};
  EXPECT_EQ(values_of(model.attention_pool(g, one, "weapon_enc")), values_of(x));
  const Var three[] = {x, x, x};
  const auto pooled = values_of(model.attention_pool(g, three, "weapon_enc"));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(pooled[i], x.value()[i], 1e-15);
  EXPECT_THROW(model.attention_pool(g, std::span<const Var>{}, "weapon_enc"), rb::Error);
}

TEST_F(ModelTest, AttentionHandEvaluatedScalarCase) {
  ad::ParamStore p;
  p.add("h.W", Tensor(1, 1, 1.0));
  p.add("h.b", Tensor(1, 1, 0.0));
  p.add("h.v", Tensor(1, 1, 1.0));
  Graph g(p);
  const Var items[] = {g.constant(Tensor(1, 1, 0.5)), g.constant(Tensor(1, 1, -0.5))};
  const double out = model.attention_pool(g, items, "h").scalar();
  const double a0 = std::exp(std::tanh(0.5)) / (std::exp(std::tanh(0.5)) + std::exp(std::tanh(-0.5)));
  // The four-digit figures are rounded; the exact weight is 0.71590.
  EXPECT_NEAR(a0, 0.7158, 1.5e-4);
  EXPECT_NEAR(out, 0.5 * a0 - 0.5 * (1 - a0), 1e-15);
  EXPECT_NEAR(out, 0.2158, 1.5e-4);
}

TEST_F(ModelTest, AttentionMatchesReferenceOnRandomInputs) {
  rb::Rng rng(12);
  const std::size_t d = 4;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> W(d, std::vector<double>(d)), items(1 + rng.below(6), std::vector<double>(d));
    std::vector<double> b(d), v(d);
    Tensor tW(d, d), tb(d, 1), tv(1, d);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) tW(r, c) = W[r][c] = rng.uniform(-2, 2);
      tb[r] = b[r] = rng.uniform(-1, 1);
      tv[r] = v[r] = rng.uniform(-2, 2);
    }
    ad::ParamStore p;
    p.add("e.W", tW);
    p.add("e.b", tb);
    p.add("e.v", tv);
    Graph g(p);
    std::vector<Var> vars;
    for (auto& it : items) {
      for (auto& x : it) x = rng.uniform(-1, 1);
      vars.push_back(g.constant_column(it));
    }
    const auto got = values_of(model.attention_pool(g, vars, "e"));
    const auto want = rt::attention_reference(items, W, b, v);
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST_F(ModelTest, EmptyInventoryUsesNullVector) {
  Graph g(params);
  EXPECT_EQ(values_of(model.player_repr(g, {})), std::vector<double>(params.at("weapon_enc.null").values().begin(),
                                                                     params.at("weapon_enc.null").values().end()));
  EXPECT_EQ(model.round_attr_encode(g, {}).value(), params.at("rae.null"));
}

TEST_F(ModelTest, RoundAttributeWeights) {
  Graph g(params);
  const rb::Inventory a{0}, b{1, 2};
  const auto pa = values_of(model.player_repr(g, a));
  const auto pb = values_of(model.player_repr(g, b));
  EXPECT_EQ(values_of(model.round_attr_encode(g, {{a, 5.0}})), pa);
  const auto check = [&](double sa, double sb, double wa) {
    const auto got = values_of(model.round_attr_encode(g, {{a, sa}, {b, sb}}));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], wa * pa[i] + (1 - wa) * pb[i], 1e-15);
  };
  check(2, 2, 0.5);
  check(1, 3, 0.25);
  check(0, 0, 0.5);
  EXPECT_THROW(model.round_attr_encode(g, {{a, -1.0}}), rb::Error);
}

TEST_F(ModelTest, EconomyNormalizationAndZeroCase) {
  auto p = params;
  zero_all(p, "econ.");
  auto& W1 = p.at("econ.W1");
  for (std::size_t c = 0; c < 10; ++c) W1(1, c) = 1.0;  // hidden[1] = sum of inputs
  p.at("econ.W2")(0, 1) = 1.0;
  Graph g(p);
  std::array<rb::Dollars, 10> full;
  full.fill(catalog.max_cash());
  EXPECT_DOUBLE_EQ(model.economy_encode(g, full).value()[0], 10.0);

  auto z = params;
  zero_all(z, "econ.W");
  for (std::size_t i = 0; i < z.at("econ.b2").size(); ++i) z.at("econ.b2")[i] = 0.1 * static_cast<double>(i + 1);
  Graph g2(z);
  std::array<rb::Dollars, 10> money{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(model.economy_encode(g2, money).value(), z.at("econ.b2"));
  std::array<rb::Dollars, 9> short_money{};
  try {
    model.economy_encode(g2, short_money);
    FAIL();
  } catch (const rb::Error& e) {
    EXPECT_EQ(e.code(), rb::Errc::WrongArity);
  }
}

TEST_F(ModelTest, StateReprShapeAndZeroCase) {
  rb::Rng rng(2);
  const auto s = rt::random_state(catalog, rng, 3000);
  Graph g(params);
  EXPECT_EQ(model.state_repr(g, s).rows(), static_cast<std::size_t>(model.config().d_h));
  auto z = params;
  zero_all(z, "state.W1");
  Graph g2(z);
  for (double v : model.state_repr(g2, s).value().values()) EXPECT_EQ(v, 0.0);
}

TEST_F(ModelTest, StateReprInvariantToTeamPermutation) {
  rb::Rng rng(31);
  const auto& big = rb::Catalog::default_fixture();
  const rb::PolicyModel m(big, rt::tiny_model_config());
  const auto p = m.init_params(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = rt::random_state(big, rng, 8000);
    Graph g(p);
    const auto h = values_of(m.state_repr(g, s));
    for (auto* team : {&s.team_weapons, &s.opp_weapons})
      for (std::size_t i = team->size(); i > 1; --i) std::swap((*team)[i - 1], (*team)[rng.below(i)]);
    Graph g2(p);
    ASSERT_EQ(values_of(m.state_repr(g2, s)), h);
  }
}

TEST_F(ModelTest, GateThresholdRule) {
  EXPECT_EQ(rb::PolicyModel::gate_decisions(std::array<double, 3>{0.6, 0.4, 0.5}),
            (rb::CategoryFlags{true, false, true}));
  auto p = params;
  zero_all(p, "gate.");
  rb::Rng rng(1);
  const auto s = rt::random_state(catalog, rng, 2000);
  for (double prob : model.gate_forward(p, s)) EXPECT_EQ(prob, 0.5);
  p.at("gate.gun.b2")[0] = 10.0;
  EXPECT_GT(model.gate_forward(p, s)[0], 0.9999);
  EXPECT_THROW(rb::PolicyModel::gate_decisions(std::array<double, 2>{0.1, 0.2}), rb::Error);
}

TEST_F(ModelTest, ZeroBudgetEmitsOnlyEnd) {
  Graph g(params);
  rb::StateInput s;
  const Var h = model.state_repr(g, s);
  rb::Rng rng(1);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto r = model.decode_sequence(g, h, k, 0, {}, rb::DecodeMode::Sample, &rng);
    EXPECT_TRUE(r.purchases.empty());
    EXPECT_EQ(r.spent, 0);
    EXPECT_TRUE(r.step_log_probs.empty());  // End was forced
  }
  EXPECT_THROW(model.decode_sequence(g, h, 0, -1, {}, rb::DecodeMode::Greedy, nullptr), rb::Error);
}

TEST_F(ModelTest, GreedyIsDeterministic) {
  rb::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto s = rt::random_state(catalog, rng, 4000);
    const auto a = model.generate_purchase(params, s, rb::DecodeMode::Greedy, 1);
    EXPECT_EQ(model.generate_purchase(params, s, rb::DecodeMode::Greedy, 99), a);
  }
}

TEST_F(ModelTest, SamplingDeterministicUnderSeed) {
  rb::Rng rng(6);
  const auto s = rt::random_state(catalog, rng, 4000);
  bool differs = false;
  const auto base = model.generate_purchase(params, s, rb::DecodeMode::Sample, 0, {true, false});
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto a = model.generate_purchase(params, s, rb::DecodeMode::Sample, seed, {true, false});
    EXPECT_EQ(model.generate_purchase(params, s, rb::DecodeMode::Sample, seed, {true, false}), a);
    differs = differs || !(a == base);
  }
  EXPECT_TRUE(differs);
}

TEST_F(ModelTest, ClosedGatesGiveEmptyPurchase) {
  auto p = params;
  zero_all(p, "gate.");
  for (auto cat : {"gun", "grenade", "equipment"}) p.at(std::string("gate.") + cat + ".b2")[0] = -5.0;
  rb::StateInput s;
  s.budget = 4000;
  EXPECT_TRUE(model.generate_purchase(p, s, rb::DecodeMode::Greedy, 0).purchases.empty());
  // Gates off: every decoder runs again.
  EXPECT_FALSE(model.generate_purchase(p, s, rb::DecodeMode::Sample, 0, {true, false}).purchases.empty() &&
               model.generate_purchase(p, s, rb::DecodeMode::Sample, 1, {true, false}).purchases.empty() &&
               model.generate_purchase(p, s, rb::DecodeMode::Sample, 2, {true, false}).purchases.empty());
}

TEST_F(ModelTest, GunDecoderSpendingEverythingStarvesLaterDecoders) {
  auto p = params;
  zero_all(p, "dec.");  // all logits tie, greedy takes the lowest legal id
  zero_all(p, "gate.");
  rb::StateInput s;
  s.budget = 1000;  // exactly the gun
  Graph g(p);
  const Var h = model.state_repr(g, s);
  const auto gen = model.generate(g, h, s, rb::DecodeMode::Greedy, nullptr, rb::kAllCategories);
  EXPECT_EQ(gen.sequence.purchases, (std::vector<rb::WeaponId>{0}));
  EXPECT_EQ(gen.spent, 1000);
  // One recorded step for the gun; every later End was forced.
  EXPECT_EQ(gen.step_log_probs.size(), 1u);
  EXPECT_NEAR(gen.step_log_probs[0].scalar(), std::log(0.5), 1e-15);
}

TEST(ModelSegments, FourPurchasesThenForcedEnd) {
  std::vector<rb::WeaponSpec> ws;
  for (int i = 0; i < 7; ++i) {
    rb::WeaponSpec w;
    w.id = i;
    w.name = "e" + std::to_string(i);
    w.category = rb::Category::Equipment;
    w.price = 10;
    ws.push_back(w);
  }
  const rb::Catalog c(ws);
  const rb::PolicyModel m(c, rt::tiny_model_config());
  auto p = m.init_params(1);
  for (auto& [name, t] : p)
    if (name.rfind("dec.", 0) == 0) std::fill(t.values().begin(), t.values().end(), 0.0);
  Graph g(p);
  const Var h = m.state_repr(g, {});
  const auto r = m.decode_sequence(g, h, 2, 1000, {}, rb::DecodeMode::Greedy, nullptr);
  EXPECT_EQ(r.purchases, (std::vector<rb::WeaponId>{0, 1, 2, 3}));
  EXPECT_EQ(r.step_log_probs.size(), 4u);
  EXPECT_EQ(m.step_mask(2, 1000, r.inventory, {0, 0, 4}, 2, rb::kAllCategories),
            (std::vector<bool>{false, false, false, false, false, false, false, true, false}));
}

TEST(ModelProperty, MaskedDistributionValid) {
  rb::Rng rng(9);
  for (int t = 0; t < 300; ++t) {
    const auto c = rt::random_catalog(rng);
    const auto inv = rt::random_inventory(c, rng, 0.3);
    const auto mask = rb::legal_action_mask(c, static_cast<rb::Dollars>(rng.between(0, 3000)), inv);
    Tensor logits(c.vocab_size(), 1);
    for (auto& v : logits.values()) v = rng.uniform(-20, 20);
    const auto probs = ad::masked_softmax_values(logits, mask);
    double total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      ASSERT_GE(probs[i], 0.0);
      if (!mask[i]) ASSERT_EQ(probs[i], 0.0);
      total += probs[i];
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

class ArityTest : public ::testing::TestWithParam<rb::DecoderArity> {};

TEST_P(ArityTest, GenerationsAreSoundAndCategoryOrdered) {
  rb::Rng rng(10);
  for (int t = 0; t < 400; ++t) {
    const auto c = rt::random_catalog(rng);
    const rb::PolicyModel m(c, rt::tiny_model_config(GetParam()));
    const auto p = m.init_params(rng.next_u64());
    const auto s = rt::random_state(c, rng, 4000);
    const auto seq = m.generate_purchase(p, s, rb::DecodeMode::Sample, rng.next_u64(), {true, rng.bernoulli(0.5)});
    ASSERT_TRUE(sound(c, s, seq));
    std::array<int, 3> per{};
    int last = -1;
    for (auto id : seq.purchases) {
      const int cat = static_cast<int>(c.category(id));
      ASSERT_GE(cat, last);
      last = cat;
      ASSERT_LE(++per[static_cast<std::size_t>(cat)], rb::kMaxSegmentPurchases);
    }
  }
}

TEST_P(ArityTest, StepLogProbsMatchTeacherForcedRecomputation) {
  rb::Rng rng(11);
  const auto& c = rb::Catalog::default_fixture();
  const rb::PolicyModel m(c, rt::tiny_model_config(GetParam()));
  const auto p = m.init_params(21);
  for (int t = 0; t < 100; ++t) {
    const auto s = rt::random_state(c, rng, 9000);
    rb::CategoryFlags run{rng.bernoulli(0.8), rng.bernoulli(0.8), rng.bernoulli(0.8)};
    Graph g(p);
    const Var h = m.state_repr(g, s);
    rb::Rng sampler(rng.next_u64());
    const auto gen = m.generate(g, h, s, rb::DecodeMode::Sample, &sampler, run);
    double summed = 0;
    for (const auto& v : gen.step_log_probs) summed += v.scalar();
    const double forced = m.sequence_log_prob(g, h, s, gen.sequence.purchases, run, false).scalar();
    ASSERT_NEAR(forced, summed, 1e-12);
  }
}

TEST_P(ArityTest, RestrictedCategoriesNeverEmitted) {
  rb::Rng rng(12);
  const auto& c = rb::Catalog::default_fixture();
  const rb::PolicyModel m(c, rt::tiny_model_config(GetParam()));
  const auto p = m.init_params(2);
  for (int t = 0; t < 100; ++t) {
    const auto s = rt::random_state(c, rng, 9000);
    const rb::CategoryFlags run{false, true, false};
    Graph g(p);
    const Var h = m.state_repr(g, s);
    rb::Rng sampler(rng.next_u64());
    for (auto id : m.generate(g, h, s, rb::DecodeMode::Sample, &sampler, run).sequence.purchases)
      ASSERT_EQ(c.category(id), rb::Category::Grenade);
  }
}

INSTANTIATE_TEST_SUITE_P(BothArities, ArityTest, ::testing::Values(rb::DecoderArity::Multi, rb::DecoderArity::Single));

TEST(ModelSingle, OneDecoderNamedAll) {
  const auto c = rt::tiny_catalog();
  const rb::PolicyModel m(c, rt::tiny_model_config(rb::DecoderArity::Single));
  EXPECT_EQ(m.decoder_count(), 1u);
  EXPECT_EQ(m.decoder_name(0), "all");
  const auto p = m.init_params(1);
  EXPECT_TRUE(p.contains("dec.all.lstm.W"));
  EXPECT_FALSE(p.contains("dec.gun.lstm.W"));
  // Grenades may not follow equipment.
  const auto mask = m.step_mask(0, 5000, {}, {0, 0, 1}, 2, rb::kAllCategories);
  EXPECT_FALSE(mask[0]);
  EXPECT_FALSE(mask[1]);
}
