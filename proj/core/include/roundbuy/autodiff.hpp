#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "roundbuy/tensor.hpp"

namespace roundbuy::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }
  double scalar() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

struct GraphOptions {
#ifdef NDEBUG
  bool check_finite = false;
#else
  bool check_finite = true;
#endif
};

// Tape of differentiable operations over dense 64-bit arrays. Nodes are
// appended in evaluation order, so reverse creation order is a valid
// topological order for backpropagation. Confined to one thread.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(const ParamStore& params, GraphOptions options = {});
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf bound to a named parameter; repeated calls return the same node.
  Var param(std::string_view name);
  Var constant(Tensor value);
  Var constant_column(std::span<const double> values);
  Var scalar(double v) { return constant(Tensor(1, 1, v)); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);
  // Gradients for every parameter referenced through param(); parameters
  // unreachable from the loss get zeros.
  ParamStore gradients() const;

  const ParamStore& params() const { return params_; }
  std::size_t node_count() const { return nodes_.size(); }

  // While disabled, new op nodes do not record backward rules. Parameter
  // leaves are unaffected.
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  const GraphOptions& options() const { return options_; }

  // --- op-author interface ---
  Var push(Tensor value, bool requires_grad, const char* op, BackwardFn backward);
  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient buffer of a node (allocated during backward for nodes that
  // require gradients; empty otherwise).
  std::vector<double>& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  Var handle(int id) { return Var(this, id); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "";
    BackwardFn backward;
  };

  const ParamStore& params_;
  GraphOptions options_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  bool grad_enabled_ = true;
};

class NoGradGuard {
 public:
  explicit NoGradGuard(Graph& g) : graph_(g), previous_(g.grad_enabled()) { g.set_grad_enabled(false); }
  ~NoGradGuard() { graph_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Graph& graph_;
  bool previous_;
};

// --- primitives -------------------------------------------------------------
// Each primitive has a forward and a backward rule. Vectors are (n x 1).

Var matmul(Var a, Var b);
// Elementwise sum; if `b` is (rows x 1) and `a` is (rows x cols), b is
// broadcast across the columns of a.
Var add(Var a, Var b);
Var scale(Var a, double factor);
// Vertical stacking of column vectors / matrices with equal column counts.
Var concat_rows(std::span<const Var> parts);
// Horizontal stacking of matrices with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
// Softmax over all elements; output has the input's shape.
Var softmax(Var a);
// sum_t weights[t] * items(:, t) for items (d x n) and n weights of any shape.
Var weighted_sum(Var items, Var weights);
// Row `row` of table (vocab x d) returned as a (d x 1) column.
Var embedding(Var table, int row);
// Contiguous elements [offset, offset + length) as a column.
Var slice(Var a, std::size_t offset, std::size_t length);
// Sum of scalars (1 x 1 each).
Var sum(std::span<const Var> scalars);
// Value copy that blocks gradient flow.
Var stop_gradient(Var a);

struct LstmOutput {
  Var h;
  Var c;
};
// One LSTM step. weights: (4H x (I + H)), bias: (4H x 1), gate order i, f, g, o.
LstmOutput lstm_cell(Var weights, Var bias, Var x, Var h, Var c);

// log p(index) under softmax restricted to mask[i] == true. Masked entries
// carry no probability and receive no gradient.
Var masked_log_prob(Var logits, const std::vector<bool>& mask, int index);
// Probabilities of the masked softmax (zeros at masked positions); values only.
std::vector<double> masked_softmax_values(const Tensor& logits, const std::vector<bool>& mask);
// Sum over elements of binary cross-entropy between sigmoid(logits) and
// targets, computed in the numerically stable logit form.
Var bce_with_logits(Var logits, std::span<const double> targets);

}  // namespace roundbuy::ad
