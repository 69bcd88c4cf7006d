#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "roundbuy/catalog.hpp"
#include "roundbuy/state.hpp"
#include "roundbuy/tensor.hpp"

namespace roundbuy {

// Parameter name of the shared action-embedding matrix in every ParamStore.
inline constexpr const char* kEmbeddingParam = "embed.actions";

// Weapon purchases (ids aligned with the catalog) followed by End and Start.
struct ActionVocab {
  std::vector<std::string> names;
  ActionId end = 0;
  ActionId start = 0;

  std::size_t size() const { return names.size(); }
};

ActionVocab build_vocab(const Catalog& catalog);

struct CbowConfig {
  int window = 2;
  int d_emb = 32;
  int epochs = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 11;
};

// One training example: mean of `context` embeddings predicts `target`.
// Identical (context, target) pairs are merged and carry a count.
struct CbowPair {
  std::vector<ActionId> context;  // sorted
  ActionId target = 0;
  double weight = 1.0;
};

std::vector<CbowPair> cbow_pairs(const std::vector<ActionSequence>& sequences, const Catalog& catalog,
                                 int window);

// Weighted mean negative log-likelihood of the full-softmax CBOW model held in
// `params` ("cbow.in", "cbow.out", "cbow.bias"). Writes gradients when asked.
double cbow_objective(const ad::ParamStore& params, const std::vector<CbowPair>& pairs,
                      ad::ParamStore* grads = nullptr);

struct CbowResult {
  ad::Tensor embeddings;            // (vocab x d_emb): input plus output vectors
  std::vector<double> epoch_loss;   // objective before each epoch's update
};

// Full-batch CBOW trained with Adam, one step per epoch; deterministic under
// config.seed. Throws Error(EmptyInput) when no context pairs exist.
CbowResult cbow_train(const std::vector<ActionSequence>& sequences, const Catalog& catalog,
                      const CbowConfig& config);

double cosine_similarity(const ad::Tensor& table, ActionId a, ActionId b);

// Plain text: one line per token, "<name> v1 v2 ... vd" with spaces in names
// replaced by underscores.
void export_embeddings(std::ostream& out, const ActionVocab& vocab, const ad::Tensor& table);
// Inverse of export_embeddings; token names must match the vocabulary in order.
ad::Tensor import_embeddings(std::istream& in, const ActionVocab& vocab);

}  // namespace roundbuy
