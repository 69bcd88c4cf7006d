#include "roundbuy/training.hpp"

#include <cstdio>
#include <memory>
#include <ostream>
#include <type_traits>

#include "roundbuy/embeddings.hpp"
#include "roundbuy/error.hpp"

namespace roundbuy {

using ad::Graph;
using ad::Var;

namespace {

Var sum_or_zero(Graph& g, const std::vector<Var>& terms) {
  if (terms.empty()) return g.scalar(0.0);
  return ad::sum(terms);
}

CategoryFlags rollout_categories(Graph& g, const PolicyModel& model, Var h, const TrainConfig& config) {
  if (!config.consult_gates_in_training) return kAllCategories;
  ad::NoGradGuard no_grad(g);
  const Var probs = ad::sigmoid(model.gate_logits(g, h));
  const std::array<double, kCategoryCount> p{probs.value()[0], probs.value()[1], probs.value()[2]};
  return PolicyModel::gate_decisions(p);
}

void accumulate(StepStats& into, const StepStats& s) {
  into.loss += s.loss;
  into.scst += s.scst;
  into.gate += s.gate;
  into.mle += s.mle;
  into.r_sample += s.r_sample;
  into.r_greedy += s.r_greedy;
}

StepStats mean_of(const std::vector<StepStats>& steps) {
  StepStats m;
  for (const auto& s : steps) accumulate(m, s);
  if (steps.empty()) return m;
  const double n = static_cast<double>(steps.size());
  m.loss /= n;
  m.scst /= n;
  m.gate /= n;
  m.mle /= n;
  m.r_sample /= n;
  m.r_greedy /= n;
  return m;
}

void take_step(const PolicyModel& model, AdaptResult& state, const RoundExample& example, Phase phase,
               const TrainConfig& config, std::uint64_t seed) {
  RoundGradient rg = round_gradient(model, state.params, example, phase, config, seed);
  ad::adam_step(state.params, rg.grads, state.optimizer);
  state.steps.push_back(rg.stats);
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void read_value(const std::map<std::string, std::string>& meta, const std::string& key, T& out) {
  auto it = meta.find(key);
  if (it == meta.end()) return;
  try {
    std::size_t used = 0;
    if constexpr (std::is_same_v<T, bool>) {
      if (it->second != "0" && it->second != "1") throw std::invalid_argument(key);
      out = it->second == "1";
      used = it->second.size();
    } else if constexpr (std::is_same_v<T, double>) {
      out = std::stod(it->second, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      out = std::stoull(it->second, &used);
    } else {
      out = std::stoi(it->second, &used);
    }
    if (used != it->second.size()) throw std::invalid_argument(key);
  } catch (const std::exception&) {
    throw Error(Errc::CheckpointFormat, "bad metadata value for '" + key + "': " + it->second);
  }
}

}  // namespace

void write_train_metadata(const TrainConfig& c, std::map<std::string, std::string>& meta) {
  meta["train.shots"] = std::to_string(c.shots);
  meta["train.inner_lr"] = exact(c.inner_lr);
  meta["train.steps_per_shot"] = std::to_string(c.steps_per_shot);
  meta["train.meta_step"] = exact(c.meta_step);
  meta["train.anneal"] = c.anneal ? "1" : "0";
  meta["train.meta_iterations"] = std::to_string(c.meta_iterations);
  meta["train.warmup_epochs"] = std::to_string(c.warmup_epochs);
  meta["train.batch_width"] = std::to_string(c.batch_width);
  meta["train.gate_weight"] = exact(c.gate_weight);
  meta["train.detach_gates"] = c.detach_gates ? "1" : "0";
  meta["train.freeze_embeddings"] = c.freeze_embeddings ? "1" : "0";
  meta["train.use_rae"] = c.use_rae ? "1" : "0";
  meta["train.consult_gates_in_training"] = c.consult_gates_in_training ? "1" : "0";
  meta["train.seed"] = std::to_string(c.seed);
}

TrainConfig read_train_metadata(const std::map<std::string, std::string>& meta) {
  TrainConfig c;
  read_value(meta, "train.shots", c.shots);
  read_value(meta, "train.inner_lr", c.inner_lr);
  read_value(meta, "train.steps_per_shot", c.steps_per_shot);
  read_value(meta, "train.meta_step", c.meta_step);
  read_value(meta, "train.anneal", c.anneal);
  read_value(meta, "train.meta_iterations", c.meta_iterations);
  read_value(meta, "train.warmup_epochs", c.warmup_epochs);
  read_value(meta, "train.batch_width", c.batch_width);
  read_value(meta, "train.gate_weight", c.gate_weight);
  read_value(meta, "train.detach_gates", c.detach_gates);
  read_value(meta, "train.freeze_embeddings", c.freeze_embeddings);
  read_value(meta, "train.use_rae", c.use_rae);
  read_value(meta, "train.consult_gates_in_training", c.consult_gates_in_training);
  read_value(meta, "train.seed", c.seed);
  return c;
}

ScstTerms scst_loss(Graph& g, const PolicyModel& model, Var h, const StateInput& state, const ActionSequence& label,
                    Rng& rng, const CategoryFlags& run) {
  ScstTerms out;
  Generation sample = model.generate(g, h, state, DecodeMode::Sample, &rng, run, true);
  {
    ad::NoGradGuard no_grad(g);
    out.greedy = model.generate(g, h, state, DecodeMode::Greedy, nullptr, run, false).sequence;
  }
  out.sample = std::move(sample.sequence);
  out.r_sample = f1_action_set(out.sample, label);
  out.r_greedy = f1_action_set(out.greedy, label);
  out.loss = ad::scale(sum_or_zero(g, sample.step_log_probs), out.r_greedy - out.r_sample);
  return out;
}

Var scst_loss_frozen(Graph& g, const PolicyModel& model, Var h, const StateInput& state, const ActionSequence& label,
                     const ActionSequence& sample, const ActionSequence& greedy, const CategoryFlags& run) {
  const double advantage = f1_action_set(greedy, label) - f1_action_set(sample, label);
  return ad::scale(model.sequence_log_prob(g, h, state, sample.purchases, run, false), advantage);
}

std::array<double, kCategoryCount> gate_targets(const ActionSequence& label, const Catalog& catalog) {
  std::array<double, kCategoryCount> t{};
  for (WeaponId id : label.purchases) t[static_cast<std::size_t>(catalog.category(id))] = 1.0;
  return t;
}

Var gate_loss(Graph& g, const PolicyModel& model, Var h, const ActionSequence& label) {
  const auto targets = gate_targets(label, model.catalog());
  return ad::bce_with_logits(model.gate_logits(g, h), targets);
}

Var mle_warmup_loss(Graph& g, const PolicyModel& model, Var h, const StateInput& state, const ActionSequence& label) {
  return ad::scale(model.sequence_log_prob(g, h, state, label.purchases, kAllCategories, true), -1.0);
}

RoundGradient round_gradient(const PolicyModel& model, const ad::ParamStore& params, const RoundExample& example,
                             Phase phase, const TrainConfig& config, std::uint64_t seed) {
  Graph g(params);
  const Var h = model.state_repr(g, example.state, config.use_rae);
  RoundGradient out;
  const Var gate = gate_loss(g, model, config.detach_gates ? ad::stop_gradient(h) : h, example.label);
  out.stats.gate = gate.scalar();
  std::vector<Var> terms{ad::scale(gate, config.gate_weight)};
  if (phase == Phase::Scst) {
    Rng rng(seed);
    const CategoryFlags run = rollout_categories(g, model, h, config);
    ScstTerms scst = scst_loss(g, model, h, example.state, example.label, rng, run);
    out.stats.scst = scst.loss.scalar();
    out.stats.r_sample = scst.r_sample;
    out.stats.r_greedy = scst.r_greedy;
    terms.push_back(scst.loss);
  } else {
    const Var mle = mle_warmup_loss(g, model, h, example.state, example.label);
    out.stats.mle = mle.scalar();
    terms.push_back(mle);
    // Rewards are still reported during warm-up so that logs stay comparable.
    ad::NoGradGuard no_grad(g);
    const auto greedy = model.generate(g, h, example.state, DecodeMode::Greedy, nullptr, kAllCategories, false);
    out.stats.r_greedy = f1_action_set(greedy.sequence, example.label);
  }
  const Var total = ad::sum(terms);
  out.stats.loss = total.scalar();
  g.backward(total);
  out.grads = g.gradients();
  if (config.freeze_embeddings) out.grads.erase(kEmbeddingParam);
  return out;
}

AdaptResult inner_adapt(const PolicyModel& model, const ad::ParamStore& theta, const EpisodeTask& task,
                        const TrainConfig& config, Phase phase, std::uint64_t seed) {
  if (config.shots < 1) throw Error(Errc::InvalidConfig, "shots must be at least 1");
  if (task.support.size() < static_cast<std::size_t>(config.shots))
    throw Error(Errc::InsufficientSupport, "task " + task.match_id + "/" + std::to_string(task.player_slot) + " has " +
                                               std::to_string(task.support.size()) + " support rounds, needs " +
                                               std::to_string(config.shots));
  AdaptResult out;
  out.params = theta;
  out.optimizer = ad::OptimizerState::adam(config.inner_lr);
  for (int i = 0; i < config.shots; ++i)
    for (int s = 0; s < config.steps_per_shot; ++s)
      take_step(model, out, task.support[static_cast<std::size_t>(i)], phase, config,
                derive_seed(seed, {0, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s)}));
  return out;
}

void target_pass(const PolicyModel& model, AdaptResult& adapted, const EpisodeTask& task, const TrainConfig& config,
                 Phase phase, std::uint64_t seed) {
  for (std::size_t i = 0; i < task.target.size(); ++i)
    take_step(model, adapted, task.target[i], phase, config, derive_seed(seed, {1, i}));
}

double meta_step_at(const TrainConfig& config, int iteration) {
  if (!config.anneal || config.meta_iterations <= 0) return config.meta_step;
  return config.meta_step * (1.0 - static_cast<double>(iteration) / config.meta_iterations);
}

MetaResult meta_train(const PolicyModel& model, const ad::ParamStore& init,
                      const std::vector<std::vector<EpisodeTask>>& matches, const TrainConfig& config,
                      const MetaHooks& hooks) {
  if (config.meta_step < 0.0 || config.meta_step > 1.0) throw Error(Errc::InvalidConfig, "meta step must be in [0, 1]");
  if (!(config.inner_lr > 0.0)) throw Error(Errc::InvalidConfig, "inner learning rate must be positive");
  if (config.batch_width < 1) throw Error(Errc::InvalidConfig, "batch width must be at least 1");
  std::vector<const std::vector<EpisodeTask>*> usable;
  for (const auto& m : matches)
    if (!m.empty()) usable.push_back(&m);
  if (usable.empty()) throw Error(Errc::EmptyInput, "no training tasks");

  MetaResult result;
  result.params = init;
  ad::ParamStore best = init;
  int evaluations_since_best = 0;
  Rng rng(config.seed);
  const long long warmup_iterations = static_cast<long long>(config.warmup_epochs) * static_cast<long long>(usable.size());

  for (int it = 0; it < config.meta_iterations; ++it) {
    const auto& tasks = *usable[rng.below(usable.size())];
    const Phase phase = it < warmup_iterations ? Phase::Warmup : Phase::Scst;
    const double eps = meta_step_at(config, it);
    std::vector<StepStats> steps;
    const std::size_t width = std::min(tasks.size(), static_cast<std::size_t>(config.batch_width));
    for (std::size_t t = 0; t < width; ++t) {
      const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(it), t});
      AdaptResult adapted = inner_adapt(model, result.params, tasks[t], config, phase, seed);
      target_pass(model, adapted, tasks[t], config, phase, seed);
      steps.insert(steps.end(), adapted.steps.begin(), adapted.steps.end());
      result.params = ad::interpolate_params(result.params, adapted.params, eps);
    }
    const StepStats mean = mean_of(steps);
    result.history.push_back(mean);
    result.iterations = it + 1;
    if (hooks.log) {
      char buf[320];
      std::snprintf(buf, sizeof buf,
                    "iter %d match %s phase %s eps %.6f loss %.6f scst %.6f gate %.6f mle %.6f r_sample %.6f "
                    "r_greedy %.6f\n",
                    it, tasks.front().match_id.c_str(), phase == Phase::Warmup ? "warmup" : "scst", eps, mean.loss,
                    mean.scst, mean.gate, mean.mle, mean.r_sample, mean.r_greedy);
      *hooks.log << buf;
    }
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0)
      hooks.on_checkpoint(it + 1, result.params);
    if (hooks.dev_score && config.eval_every > 0 && (it + 1) % config.eval_every == 0) {
      const double score = hooks.dev_score(result.params);
      if (hooks.log) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "dev %d f1 %.6f\n", it + 1, score);
        *hooks.log << buf;
      }
      if (!result.best_dev || score > *result.best_dev) {
        result.best_dev = score;
        best = result.params;
        evaluations_since_best = 0;
      } else if (config.patience > 0 && ++evaluations_since_best >= config.patience) {
        break;
      }
    }
  }
  if (result.best_dev) result.params = std::move(best);
  return result;
}

std::uint64_t task_seed(std::uint64_t base, const EpisodeTask& task) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : task.match_id) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return derive_seed(base, {h, static_cast<std::uint64_t>(task.player_slot)});
}

TaskPolicy learned_policy(const PolicyModel& model, const ad::ParamStore& theta, const TrainConfig& config,
                          InferenceFlags flags) {
  TrainConfig adapt_config = config;
  adapt_config.use_rae = flags.use_rae;
  return [&model, &theta, adapt_config, flags](const EpisodeTask& task) -> RoundPolicy {
    auto adapted = std::make_shared<ad::ParamStore>(
        inner_adapt(model, theta, task, adapt_config, Phase::Scst, task_seed(adapt_config.seed, task)).params);
    return [&model, adapted, flags](const RoundExample& ex) {
      return model.generate_purchase(*adapted, ex.state, DecodeMode::Greedy, 0, flags);
    };
  };
}

}  // namespace roundbuy
