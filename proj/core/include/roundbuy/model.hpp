#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "roundbuy/autodiff.hpp"
#include "roundbuy/catalog.hpp"
#include "roundbuy/random.hpp"
#include "roundbuy/state.hpp"

namespace roundbuy {

// Multi: one decoder per category. Single: one shared decoder over the whole
// vocabulary that still emits categories in gun, grenade, equipment order.
enum class DecoderArity { Multi, Single };

struct ModelConfig {
  int d_emb = 32;
  int d_h = 64;
  int lstm_hidden = 64;
  int gate_hidden = 32;
  int econ_hidden = 32;
  int d_c = 16;
  DecoderArity arity = DecoderArity::Multi;

  bool operator==(const ModelConfig&) const = default;
};

// Stored as "model.*" checkpoint metadata.
void write_model_metadata(const ModelConfig& config, std::map<std::string, std::string>& metadata);
ModelConfig read_model_metadata(const std::map<std::string, std::string>& metadata);

enum class DecodeMode { Greedy, Sample };

inline constexpr int kMaxSegmentPurchases = 4;
inline constexpr double kGateThreshold = 0.5;

using CategoryFlags = std::array<bool, kCategoryCount>;
inline constexpr CategoryFlags kAllCategories{true, true, true};

struct InferenceFlags {
  bool use_rae = true;
  bool use_gates = true;
};

struct DecodeResult {
  std::vector<WeaponId> purchases;
  // One entry per sampled step, End included. Forced steps (only End legal)
  // have probability one and are not recorded.
  std::vector<ad::Var> step_log_probs;
  Dollars spent = 0;
  Inventory inventory;  // after the purchases
};

struct Generation {
  ActionSequence sequence;
  std::vector<ad::Var> step_log_probs;
  Dollars spent = 0;
};

class PolicyModel {
 public:
  PolicyModel(const Catalog& catalog, ModelConfig config);

  const Catalog& catalog() const { return *catalog_; }
  const ModelConfig& config() const { return config_; }
  std::size_t decoder_count() const { return config_.arity == DecoderArity::Multi ? kCategoryCount : 1; }
  std::string decoder_name(std::size_t decoder) const;

  // Xavier-uniform weights, zero biases, N(0, 0.1^2) attention vectors and
  // null vectors. Deterministic in seed.
  ad::ParamStore init_params(std::uint64_t seed) const;

  // --- encoders ---
  // Attention pooling of (d x 1) items with the "<encoder>.W/b/v" parameters.
  ad::Var attention_pool(ad::Graph& g, std::span<const ad::Var> items, const std::string& encoder) const;
  // Pooled weapon embeddings of one player; the weapon encoder's null vector
  // when the inventory is empty.
  ad::Var player_repr(ad::Graph& g, const Inventory& inventory) const;
  ad::Var team_repr(ad::Graph& g, std::span<const Inventory> team) const;
  ad::Var round_attr_encode(ad::Graph& g, const std::vector<HistoryEntry>& history) const;
  ad::Var economy_encode(ad::Graph& g, std::span<const Dollars> money) const;
  ad::Var state_repr(ad::Graph& g, const StateInput& state, bool use_rae = true) const;

  // (3 x 1) gate logits in category order.
  ad::Var gate_logits(ad::Graph& g, ad::Var h) const;
  // Which categories may be purchased, decided from gate probabilities.
  static CategoryFlags gate_decisions(std::span<const double> probabilities);

  // --- decoding ---
  // Runs one decoder from Start until End. `allowed` restricts the categories
  // the single decoder may emit (ignored by per-category decoders). With
  // record_log_probs false no log-probability nodes are built.
  DecodeResult decode_sequence(ad::Graph& g, ad::Var h, std::size_t decoder, Dollars budget,
                               Inventory inventory, DecodeMode mode, Rng* rng,
                               const CategoryFlags& allowed = kAllCategories,
                               bool record_log_probs = true) const;

  // Decoders in category order, threading budget and inventory through them.
  // `run` selects categories (gates).
  Generation generate(ad::Graph& g, ad::Var h, const StateInput& state, DecodeMode mode, Rng* rng,
                      const CategoryFlags& run, bool record_log_probs = true) const;

  // Teacher-forced log-probability of `purchases` (the End of every decoded
  // segment included) under the same masks as generation. Purchases that are
  // illegal at their step are skipped when skip_illegal, otherwise they throw.
  ad::Var sequence_log_prob(ad::Graph& g, ad::Var h, const StateInput& state,
                            const std::vector<WeaponId>& purchases, const CategoryFlags& run = kAllCategories,
                            bool skip_illegal = true) const;

  // --- value-only conveniences (fresh graph, no gradients) ---
  std::array<double, kCategoryCount> gate_forward(const ad::ParamStore& params, const StateInput& state,
                                                  bool use_rae = true) const;
  ActionSequence generate_purchase(const ad::ParamStore& params, const StateInput& state, DecodeMode mode,
                                   std::uint64_t seed, InferenceFlags flags = {}) const;

  // Legal next actions for one decoding step. `segment_counts` are purchases
  // already emitted per category by this decoder; `last_category` is the
  // category of the previous purchase (-1 before the first).
  std::vector<bool> step_mask(std::size_t decoder, Dollars cash, const Inventory& inventory,
                              const std::array<int, kCategoryCount>& segment_counts, int last_category,
                              const CategoryFlags& allowed) const;

 private:
  struct DecoderState {
    ad::Var h;
    ad::Var c;
  };
  DecoderState init_decoder(ad::Graph& g, ad::Var state_h, std::size_t decoder) const;
  ad::Var step_logits(ad::Graph& g, DecoderState& st, std::size_t decoder, ActionId input) const;

  const Catalog* catalog_;
  ModelConfig config_;
};

}  // namespace roundbuy
