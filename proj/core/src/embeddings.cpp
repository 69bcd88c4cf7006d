#include "roundbuy/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "roundbuy/error.hpp"
#include "roundbuy/optim.hpp"
#include "roundbuy/random.hpp"

namespace roundbuy {

ActionVocab build_vocab(const Catalog& catalog) {
  ActionVocab v;
  for (const auto& w : catalog.weapons()) v.names.push_back(w.name);
  v.end = catalog.end_action();
  v.start = catalog.start_action();
  v.names.push_back("End");
  v.names.push_back("Start");
  return v;
}

std::vector<CbowPair> cbow_pairs(const std::vector<ActionSequence>& sequences, const Catalog& catalog,
                                 int window) {
  if (window < 1) throw Error(Errc::InvalidConfig, "CBOW window must be >= 1");
  std::map<std::pair<std::vector<ActionId>, ActionId>, double> merged;
  for (const auto& seq : sequences) {
    const auto tokens = seq.tokens(catalog);
    const auto n = static_cast<int>(tokens.size());
    for (int t = 0; t < n; ++t) {
      std::vector<ActionId> ctx;
      for (int j = std::max(0, t - window); j <= std::min(n - 1, t + window); ++j)
        if (j != t) ctx.push_back(tokens[static_cast<std::size_t>(j)]);
      if (ctx.empty()) continue;
      std::sort(ctx.begin(), ctx.end());
      merged[{std::move(ctx), tokens[static_cast<std::size_t>(t)]}] += 1.0;
    }
  }
  std::vector<CbowPair> pairs;
  pairs.reserve(merged.size());
  for (auto& [key, w] : merged) pairs.push_back(CbowPair{key.first, key.second, w});
  return pairs;
}

double cbow_objective(const ad::ParamStore& params, const std::vector<CbowPair>& pairs, ad::ParamStore* grads) {
  const ad::Tensor& E = params.at("cbow.in");
  const ad::Tensor& O = params.at("cbow.out");
  const ad::Tensor& b = params.at("cbow.bias");
  const std::size_t V = E.rows(), d = E.cols();
  if (grads) *grads = params.zeros_like();

  double total_w = 0.0;
  for (const auto& p : pairs) total_w += p.weight;
  if (total_w <= 0.0) throw Error(Errc::EmptyInput, "CBOW objective over no pairs");

  std::vector<double> mean(d), logits(V), prob(V), dmean(d);
  double loss = 0.0;
  for (const auto& p : pairs) {
    std::fill(mean.begin(), mean.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(p.context.size());
    for (auto c : p.context)
      for (std::size_t k = 0; k < d; ++k) mean[k] += inv * E(static_cast<std::size_t>(c), k);
    double mx = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) {
      double s = b[v];
      for (std::size_t k = 0; k < d; ++k) s += O(v, k) * mean[k];
      logits[v] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (std::size_t v = 0; v < V; ++v) z += (prob[v] = std::exp(logits[v] - mx));
    for (auto& q : prob) q /= z;
    const auto tgt = static_cast<std::size_t>(p.target);
    const double w = p.weight / total_w;
    loss -= w * (logits[tgt] - mx - std::log(z));
    if (!grads) continue;

    ad::Tensor& gE = grads->at("cbow.in");
    ad::Tensor& gO = grads->at("cbow.out");
    ad::Tensor& gb = grads->at("cbow.bias");
    std::fill(dmean.begin(), dmean.end(), 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      const double dl = w * (prob[v] - (v == tgt ? 1.0 : 0.0));
      gb[v] += dl;
      for (std::size_t k = 0; k < d; ++k) {
        gO(v, k) += dl * mean[k];
        dmean[k] += dl * O(v, k);
      }
    }
    for (auto c : p.context)
      for (std::size_t k = 0; k < d; ++k) gE(static_cast<std::size_t>(c), k) += inv * dmean[k];
  }
  return loss;
}

CbowResult cbow_train(const std::vector<ActionSequence>& sequences, const Catalog& catalog,
                      const CbowConfig& config) {
  if (config.d_emb < 1 || config.epochs < 0) throw Error(Errc::InvalidConfig, "bad CBOW dimensions");
  const auto pairs = cbow_pairs(sequences, catalog, config.window);
  if (pairs.empty()) throw Error(Errc::EmptyInput, "CBOW corpus has no context windows");

  const std::size_t V = catalog.vocab_size(), d = static_cast<std::size_t>(config.d_emb);
  Rng rng(config.seed);
  ad::Tensor E(V, d);
  const double r = 0.5 / static_cast<double>(d);
  for (std::size_t i = 0; i < E.size(); ++i) E[i] = rng.uniform(-r, r);

  ad::ParamStore params;
  params.add("cbow.in", std::move(E));
  params.add("cbow.out", ad::Tensor(V, d));
  params.add("cbow.bias", ad::Tensor(V, 1));

  auto opt = ad::OptimizerState::adam(config.learning_rate);
  CbowResult result;
  ad::ParamStore grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    result.epoch_loss.push_back(cbow_objective(params, pairs, &grads));
    ad::adam_step(params, grads, opt);
  }
  // Input plus output vectors: with mean-of-context CBOW the input vectors
  // alone separate tokens that co-occur instead of grouping them.
  result.embeddings = params.at("cbow.in");
  const ad::Tensor& out = params.at("cbow.out");
  for (std::size_t i = 0; i < result.embeddings.size(); ++i) result.embeddings[i] += out[i];
  return result;
}

double cosine_similarity(const ad::Tensor& table, ActionId a, ActionId b) {
  const auto ra = static_cast<std::size_t>(a), rb = static_cast<std::size_t>(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < table.cols(); ++k) {
    dot += table(ra, k) * table(rb, k);
    na += table(ra, k) * table(ra, k);
    nb += table(rb, k) * table(rb, k);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

void export_embeddings(std::ostream& out, const ActionVocab& vocab, const ad::Tensor& table) {
  if (table.rows() != vocab.size()) throw Error(Errc::ShapeMismatch, "embedding rows differ from vocab size");
  char buf[40];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::string name = vocab.names[r];
    std::replace(name.begin(), name.end(), ' ', '_');
    out << name;
    for (std::size_t k = 0; k < table.cols(); ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", table(r, k));
      out << buf;
    }
    out << '\n';
  }
}

ad::Tensor import_embeddings(std::istream& in, const ActionVocab& vocab) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    const std::size_t r = rows.size();
    if (r >= vocab.size()) throw Error(Errc::SchemaViolation, "more embedding rows than vocabulary entries");
    std::string expected = vocab.names[r];
    std::replace(expected.begin(), expected.end(), ' ', '_');
    if (name != expected)
      throw Error(Errc::SchemaViolation, "embedding row " + std::to_string(r) + " is '" + name + "', expected '" +
                                             expected + "'");
    std::vector<double> v;
    for (double x; ls >> x;) v.push_back(x);
    if (!ls.eof()) throw Error(Errc::SchemaViolation, "bad number in embedding row '" + name + "'");
    if (v.empty() || (!rows.empty() && v.size() != rows.front().size()))
      throw Error(Errc::SchemaViolation, "embedding rows differ in length");
    rows.push_back(std::move(v));
  }
  if (rows.size() != vocab.size())
    throw Error(Errc::SchemaViolation, "expected " + std::to_string(vocab.size()) + " embedding rows, got " +
                                           std::to_string(rows.size()));
  ad::Tensor t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].size(); ++k) t(r, k) = rows[r][k];
  return t;
}

}  // namespace roundbuy
