#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roundbuy/autodiff.hpp"
#include "roundbuy/dataset.hpp"
#include "roundbuy/evaluation.hpp"
#include "roundbuy/model.hpp"
#include "roundbuy/optim.hpp"

namespace roundbuy {

// --- losses -----------------------------------------------------------------

struct ScstTerms {
  ad::Var loss;
  double r_sample = 0.0;
  double r_greedy = 0.0;
  ActionSequence sample;
  ActionSequence greedy;
};

// (r(greedy) - r(sample)) * sum_t log p(sample_t), rewards are set F1 against
// the label. The greedy rollout is built without gradient.
ScstTerms scst_loss(ad::Graph& g, const PolicyModel& model, ad::Var h, const StateInput& state,
                    const ActionSequence& label, Rng& rng, const CategoryFlags& run = kAllCategories);

// The same loss for fixed rollouts; the sampled log-probability is recomputed
// by teacher forcing, which makes the loss a smooth function of the parameters.
ad::Var scst_loss_frozen(ad::Graph& g, const PolicyModel& model, ad::Var h, const StateInput& state,
                         const ActionSequence& label, const ActionSequence& sample, const ActionSequence& greedy,
                         const CategoryFlags& run = kAllCategories);

// Per-category indicator of a non-empty label segment.
std::array<double, kCategoryCount> gate_targets(const ActionSequence& label, const Catalog& catalog);

// Summed binary cross-entropy of the three gates against gate_targets().
ad::Var gate_loss(ad::Graph& g, const PolicyModel& model, ad::Var h, const ActionSequence& label);

// Teacher-forced negative log-likelihood of the label; label purchases that
// are illegal under the masks are skipped.
ad::Var mle_warmup_loss(ad::Graph& g, const PolicyModel& model, ad::Var h, const StateInput& state,
                        const ActionSequence& label);

// --- one optimization step ---------------------------------------------------

enum class Phase { Warmup, Scst };

struct TrainConfig {
  int shots = 5;  // K
  double inner_lr = 1e-3;
  int steps_per_shot = 1;
  double meta_step = 1.0;  // epsilon at the first meta-iteration
  bool anneal = true;      // linear decay of epsilon to 0 over meta_iterations
  int meta_iterations = 100;
  int warmup_epochs = 2;  // each epoch is one meta-iteration per training match
  int batch_width = 10;   // player tasks per sampled match
  double gate_weight = 1.0;
  bool detach_gates = false;
  bool freeze_embeddings = false;
  bool use_rae = true;
  bool consult_gates_in_training = false;
  int eval_every = 0;  // dev evaluations every N meta-iterations, 0 = never
  int patience = 0;    // dev evaluations without improvement before stopping, 0 = never stop
  int checkpoint_every = 0;
  std::uint64_t seed = 1;
};

// Stored as "train.*" checkpoint metadata; absent keys keep defaults.
void write_train_metadata(const TrainConfig& config, std::map<std::string, std::string>& metadata);
TrainConfig read_train_metadata(const std::map<std::string, std::string>& metadata);

struct StepStats {
  double loss = 0.0;
  double scst = 0.0;
  double gate = 0.0;
  double mle = 0.0;
  double r_sample = 0.0;
  double r_greedy = 0.0;
};

struct RoundGradient {
  ad::ParamStore grads;
  StepStats stats;
};

// Loss and gradients for one round: gate loss plus SCST (Scst phase) or
// teacher-forced NLL (Warmup phase).
RoundGradient round_gradient(const PolicyModel& model, const ad::ParamStore& params, const RoundExample& example,
                             Phase phase, const TrainConfig& config, std::uint64_t seed);

// --- meta-learning -----------------------------------------------------------

struct AdaptResult {
  ad::ParamStore params;
  ad::OptimizerState optimizer;
  std::vector<StepStats> steps;
};

// K shots on the support rounds (in round order, steps_per_shot steps each)
// with a fresh Adam state. `theta` is not modified. Throws
// Error(InsufficientSupport) when the task has fewer than K support rounds.
AdaptResult inner_adapt(const PolicyModel& model, const ad::ParamStore& theta, const EpisodeTask& task,
                        const TrainConfig& config, Phase phase, std::uint64_t seed);

// One step per target round, continuing the optimizer state of the inner loop.
void target_pass(const PolicyModel& model, AdaptResult& adapted, const EpisodeTask& task, const TrainConfig& config,
                 Phase phase, std::uint64_t seed);

// Epsilon at meta-iteration `iteration` (0-based).
double meta_step_at(const TrainConfig& config, int iteration);

struct MetaHooks {
  std::ostream* log = nullptr;  // one line per meta-iteration
  // Higher is better; consulted every eval_every iterations.
  std::function<double(const ad::ParamStore&)> dev_score;
  std::function<void(int iteration, const ad::ParamStore&)> on_checkpoint;
};

struct MetaResult {
  ad::ParamStore params;
  int iterations = 0;
  std::optional<double> best_dev;
  std::vector<StepStats> history;  // per meta-iteration means
};

// Reptile-style meta-training. Each iteration samples one match (with
// repetition) and, for each of its player tasks in slot order, adapts on the
// support rounds, continues over the target rounds and moves theta toward the
// result by epsilon. `matches` holds the tasks of each training match.
MetaResult meta_train(const PolicyModel& model, const ad::ParamStore& init,
                      const std::vector<std::vector<EpisodeTask>>& matches, const TrainConfig& config,
                      const MetaHooks& hooks = {});

// Evaluation policy: adapts a copy of theta on each task's support rounds
// (Scst phase, same configuration as training), then decodes greedily.
TaskPolicy learned_policy(const PolicyModel& model, const ad::ParamStore& theta, const TrainConfig& config,
                          InferenceFlags flags);

// Seed for a task-specific stream, stable across runs.
std::uint64_t task_seed(std::uint64_t base, const EpisodeTask& task);

}  // namespace roundbuy
