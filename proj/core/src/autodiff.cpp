#include "roundbuy/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "roundbuy/error.hpp"

namespace roundbuy::ad {

const Tensor& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw Error(Errc::ShapeMismatch, "scalar() on non-scalar node");
  return v[0];
}

Graph::Graph(const ParamStore& params, GraphOptions options) : params_(params), options_(options) {
  nodes_.reserve(256);
}

Var Graph::push(Tensor value, bool requires_grad, const char* op, BackwardFn backward) {
  if (options_.check_finite)
    for (double v : value.values())
      if (!std::isfinite(v)) throw Error(Errc::NonFinite, std::string("non-finite value produced by op '") + op + "'");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  n.op = op;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(std::string_view name) {
  const std::string key(name);
  if (auto it = param_ids_.find(key); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.value = params_.at(name);
  n.requires_grad = true;
  n.op = "param";
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(key, id);
  return Var(this, id);
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, "constant", nullptr); }

Var Graph::constant_column(std::span<const double> values) {
  return constant(Tensor::column(std::vector<double>(values.begin(), values.end())));
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw Error(Errc::ShapeMismatch, "loss belongs to another graph");
  if (value(loss.id()).size() != 1) throw Error(Errc::ShapeMismatch, "backward() needs a scalar loss");
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
    else n.grad.clear();
  }
  if (!nodes_[static_cast<std::size_t>(loss.id())].requires_grad) return;
  nodes_[static_cast<std::size_t>(loss.id())].grad[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward) continue;
    n.backward(*this, i);
    if (options_.check_finite)
      for (double g : n.grad)
        if (!std::isfinite(g))
          throw Error(Errc::NonFinite, std::string("non-finite gradient at op '") + n.op + "'");
  }
}

ParamStore Graph::gradients() const {
  ParamStore out;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    Tensor g(n.value.rows(), n.value.cols());
    if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), g.data());
    out.add(name, std::move(g));
  }
  return out;
}

namespace {

bool any_requires(Graph& g, std::initializer_list<Var> vars) {
  for (const auto& v : vars)
    if (g.requires_grad(v.id())) return true;
  return false;
}

void check_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error(Errc::ShapeMismatch, "operands belong to different graphs");
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(Errc::ShapeMismatch, std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                       std::to_string(b.cols()));
}

template <typename Fwd, typename Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv_from_out) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const int ia = a.id();
  return g.push(std::move(y), g.requires_grad(ia), op, [ia, deriv_from_out](Graph& gr, int self) {
    const Tensor& x = gr.value(ia);
    const Tensor& y = gr.value(self);
    const auto& gy = gr.grad(self);
    auto& gx = gr.grad(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * deriv_from_out(x[i], y[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = A.data() + i * k;
    double* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  const int ia = a.id(), ib = b.id();
  return g.push(std::move(C), any_requires(g, {a, b}), "matmul", [ia, ib, m, k, n](Graph& gr, int self) {
    const auto& gc = gr.grad(self);
    const Tensor& A = gr.value(ia);
    const Tensor& B = gr.value(ib);
    if (gr.requires_grad(ia)) {
      auto& ga = gr.grad(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += gc[i * n + j] * B[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (gr.requires_grad(ib)) {
      auto& gb = gr.grad(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * gc[i * n + j];
        }
    }
  });
}

Var add(Var a, Var b) {
  check_same_graph(a, b);
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool same = A.same_shape(B);
  const bool broadcast = !same && B.cols() == 1 && B.rows() == A.rows();
  if (!same && !broadcast) shape_error("add", A, B);
  Tensor C = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += same ? B[i] : B[i / cols];
  const int ia = a.id(), ib = b.id();
  return g.push(std::move(C), any_requires(g, {a, b}), "add", [ia, ib, same, cols](Graph& gr, int self) {
    const auto& gc = gr.grad(self);
    if (gr.requires_grad(ia)) {
      auto& ga = gr.grad(ia);
      for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
    }
    if (gr.requires_grad(ib)) {
      auto& gb = gr.grad(ib);
      for (std::size_t i = 0; i < gc.size(); ++i) gb[same ? i : i / cols] += gc[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, "scale", [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_rows of nothing");
  Graph& g = parts.front().graph();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool req = false;
  for (const auto& p : parts) {
    check_same_graph(parts.front(), p);
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
    req = req || g.requires_grad(p.id());
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off);
    off += p.size();
    ids.push_back(p.id());
  }
  return g.push(std::move(out), req, "concat_rows", [ids](Graph& gr, int self) {
    const auto& go = gr.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = gr.value(id).size();
      if (gr.requires_grad(id)) {
        auto& gi = gr.grad(id);
        for (std::size_t i = 0; i < n; ++i) gi[i] += go[off + i];
      }
      off += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols of nothing");
  Graph& g = parts.front().graph();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool req = false;
  for (const auto& p : parts) {
    check_same_graph(parts.front(), p);
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
    req = req || g.requires_grad(p.id());
  }
  Tensor out(rows, cols);
  std::vector<int> ids;
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, c0 + c) = v(r, c);
    c0 += v.cols();
    ids.push_back(p.id());
  }
  return g.push(std::move(out), req, "concat_cols", [ids, rows, cols](Graph& gr, int self) {
    const auto& go = gr.grad(self);
    std::size_t c0 = 0;
    for (int id : ids) {
      const std::size_t pc = gr.value(id).cols();
      if (gr.requires_grad(id)) {
        auto& gi = gr.grad(id);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < pc; ++c) gi[r * pc + c] += go[r * cols + c0 + c];
      }
      c0 += pc;
    }
  });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var softmax(Var a) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x.values()) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - mx));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] /= z;
  const int ia = a.id();
  return g.push(std::move(y), g.requires_grad(ia), "softmax", [ia](Graph& gr, int self) {
    const Tensor& y = gr.value(self);
    const auto& gy = gr.grad(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += gy[i] * y[i];
    auto& gx = gr.grad(ia);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (gy[i] - dot);
  });
}

Var weighted_sum(Var items, Var weights) {
  check_same_graph(items, weights);
  Graph& g = items.graph();
  const Tensor& X = items.value();
  const Tensor& w = weights.value();
  if (X.cols() != w.size()) shape_error("weighted_sum", X, w);
  const std::size_t d = X.rows(), n = X.cols();
  Tensor out(d, 1);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t r = 0; r < d; ++r) out[r] += w[t] * X(r, t);
  const int ix = items.id(), iw = weights.id();
  return g.push(std::move(out), any_requires(g, {items, weights}), "weighted_sum",
                [ix, iw, d, n](Graph& gr, int self) {
                  const auto& go = gr.grad(self);
                  const Tensor& X = gr.value(ix);
                  const Tensor& w = gr.value(iw);
                  if (gr.requires_grad(ix)) {
                    auto& gx = gr.grad(ix);
                    for (std::size_t r = 0; r < d; ++r)
                      for (std::size_t t = 0; t < n; ++t) gx[r * n + t] += w[t] * go[r];
                  }
                  if (gr.requires_grad(iw)) {
                    auto& gw = gr.grad(iw);
                    for (std::size_t t = 0; t < n; ++t) {
                      double s = 0.0;
                      for (std::size_t r = 0; r < d; ++r) s += X(r, t) * go[r];
                      gw[t] += s;
                    }
                  }
                });
}

Var embedding(Var table, int row) {
  Graph& g = table.graph();
  const Tensor& T = table.value();
  if (row < 0 || static_cast<std::size_t>(row) >= T.rows())
    throw Error(Errc::ShapeMismatch, "embedding row " + std::to_string(row) + " out of range");
  const std::size_t d = T.cols();
  const auto r = static_cast<std::size_t>(row);
  Tensor out(d, 1);
  for (std::size_t c = 0; c < d; ++c) out[c] = T(r, c);
  const int it = table.id();
  return g.push(std::move(out), g.requires_grad(it), "embedding", [it, r, d](Graph& gr, int self) {
    const auto& go = gr.grad(self);
    auto& gt = gr.grad(it);
    for (std::size_t c = 0; c < d; ++c) gt[r * d + c] += go[c];
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  if (offset + length > x.size()) throw Error(Errc::ShapeMismatch, "slice out of range");
  Tensor out(length, 1);
  for (std::size_t i = 0; i < length; ++i) out[i] = x[offset + i];
  const int ia = a.id();
  return g.push(std::move(out), g.requires_grad(ia), "slice", [ia, offset, length](Graph& gr, int self) {
    const auto& go = gr.grad(self);
    auto& gx = gr.grad(ia);
    for (std::size_t i = 0; i < length; ++i) gx[offset + i] += go[i];
  });
}

Var sum(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error(Errc::ShapeMismatch, "sum of nothing");
  Graph& g = scalars.front().graph();
  double total = 0.0;
  bool req = false;
  std::vector<int> ids;
  for (const auto& s : scalars) {
    check_same_graph(scalars.front(), s);
    total += s.scalar();
    req = req || g.requires_grad(s.id());
    ids.push_back(s.id());
  }
  return g.push(Tensor(1, 1, total), req, "sum", [ids](Graph& gr, int self) {
    const double go = gr.grad(self)[0];
    for (int id : ids)
      if (gr.requires_grad(id)) gr.grad(id)[0] += go;
  });
}

Var stop_gradient(Var a) { return a.graph().constant(a.value()); }

LstmOutput lstm_cell(Var weights, Var bias, Var x, Var h, Var c) {
  Graph& g = weights.graph();
  const Tensor& W = weights.value();
  const Tensor& b = bias.value();
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const Tensor& cv = c.value();
  const std::size_t H = hv.size(), I = xv.size(), in = I + H;
  if (W.rows() != 4 * H || W.cols() != in || b.size() != 4 * H || cv.size() != H)
    throw Error(Errc::ShapeMismatch, "lstm_cell: weights must be 4H x (I+H), bias 4H, c of size H");

  std::vector<double> z(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    const double* wr = W.data() + r * in;
    double s = b[r];
    for (std::size_t j = 0; j < I; ++j) s += wr[j] * xv[j];
    for (std::size_t j = 0; j < H; ++j) s += wr[I + j] * hv[j];
    z[r] = s;
  }
  // gates: [i | f | g | o] after nonlinearity
  std::vector<double> gates(4 * H);
  Tensor out(2 * H, 1);
  std::vector<double> tanh_c(H);
  for (std::size_t k = 0; k < H; ++k) {
    const double ig = sigmoid_scalar(z[k]);
    const double fg = sigmoid_scalar(z[H + k]);
    const double gg = std::tanh(z[2 * H + k]);
    const double og = sigmoid_scalar(z[3 * H + k]);
    gates[k] = ig;
    gates[H + k] = fg;
    gates[2 * H + k] = gg;
    gates[3 * H + k] = og;
    const double cn = fg * cv[k] + ig * gg;
    tanh_c[k] = std::tanh(cn);
    out[k] = og * tanh_c[k];
    out[H + k] = cn;
  }
  const int iw = weights.id(), ib = bias.id(), ix = x.id(), ih = h.id(), ic = c.id();
  const bool req = any_requires(g, {weights, bias, x, h, c});
  Var fused = g.push(std::move(out), req, "lstm_cell",
                     [iw, ib, ix, ih, ic, H, I, in, gates = std::move(gates),
                      tanh_c = std::move(tanh_c)](Graph& gr, int self) {
                       const auto& go = gr.grad(self);
                       const Tensor& W = gr.value(iw);
                       const Tensor& xv = gr.value(ix);
                       const Tensor& hv = gr.value(ih);
                       const Tensor& cv = gr.value(ic);
                       std::vector<double> dz(4 * H);
                       std::vector<double> dc_prev(H);
                       for (std::size_t k = 0; k < H; ++k) {
                         const double ig = gates[k], fg = gates[H + k], gg = gates[2 * H + k],
                                      og = gates[3 * H + k];
                         const double dh = go[k];
                         const double dc = go[H + k] + dh * og * (1.0 - tanh_c[k] * tanh_c[k]);
                         dz[k] = dc * gg * ig * (1.0 - ig);
                         dz[H + k] = dc * cv[k] * fg * (1.0 - fg);
                         dz[2 * H + k] = dc * ig * (1.0 - gg * gg);
                         dz[3 * H + k] = dh * tanh_c[k] * og * (1.0 - og);
                         dc_prev[k] = dc * fg;
                       }
                       if (gr.requires_grad(iw)) {
                         auto& gw = gr.grad(iw);
                         for (std::size_t r = 0; r < 4 * H; ++r) {
                           const double d = dz[r];
                           if (d == 0.0) continue;
                           double* row = gw.data() + r * in;
                           for (std::size_t j = 0; j < I; ++j) row[j] += d * xv[j];
                           for (std::size_t j = 0; j < H; ++j) row[I + j] += d * hv[j];
                         }
                       }
                       if (gr.requires_grad(ib)) {
                         auto& gb = gr.grad(ib);
                         for (std::size_t r = 0; r < 4 * H; ++r) gb[r] += dz[r];
                       }
                       const bool need_x = gr.requires_grad(ix), need_h = gr.requires_grad(ih);
                       if (need_x || need_h) {
                         std::vector<double> dxh(in, 0.0);
                         for (std::size_t r = 0; r < 4 * H; ++r) {
                           const double d = dz[r];
                           if (d == 0.0) continue;
                           const double* row = W.data() + r * in;
                           for (std::size_t j = 0; j < in; ++j) dxh[j] += d * row[j];
                         }
                         if (need_x) {
                           auto& gx = gr.grad(ix);
                           for (std::size_t j = 0; j < I; ++j) gx[j] += dxh[j];
                         }
                         if (need_h) {
                           auto& gh = gr.grad(ih);
                           for (std::size_t j = 0; j < H; ++j) gh[j] += dxh[I + j];
                         }
                       }
                       if (gr.requires_grad(ic)) {
                         auto& gc = gr.grad(ic);
                         for (std::size_t k = 0; k < H; ++k) gc[k] += dc_prev[k];
                       }
                     });
  return LstmOutput{slice(fused, 0, H), slice(fused, H, H)};
}

std::vector<double> masked_softmax_values(const Tensor& logits, const std::vector<bool>& mask) {
  if (mask.size() != logits.size()) throw Error(Errc::ShapeMismatch, "mask length differs from logits");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) mx = std::max(mx, logits[i]);
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) z += (p[i] = std::exp(logits[i] - mx));
  if (!(z > 0.0)) throw Error(Errc::ShapeMismatch, "masked softmax over an empty mask");
  for (double& v : p) v /= z;
  return p;
}

Var masked_log_prob(Var logits, const std::vector<bool>& mask, int index) {
  Graph& g = logits.graph();
  const Tensor& x = logits.value();
  if (index < 0 || static_cast<std::size_t>(index) >= x.size() || !mask.at(static_cast<std::size_t>(index)))
    throw Error(Errc::ShapeMismatch, "masked_log_prob: index is masked or out of range");
  std::vector<double> p = masked_softmax_values(x, mask);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) z += std::exp(x[i] - mx);
  const double lp = x[static_cast<std::size_t>(index)] - mx - std::log(z);
  const int il = logits.id();
  const auto idx = static_cast<std::size_t>(index);
  return g.push(Tensor(1, 1, lp), g.requires_grad(il), "masked_log_prob",
                [il, idx, p = std::move(p)](Graph& gr, int self) {
                  const double go = gr.grad(self)[0];
                  auto& gx = gr.grad(il);
                  for (std::size_t i = 0; i < p.size(); ++i) gx[i] -= go * p[i];
                  gx[idx] += go;
                });
}

Var bce_with_logits(Var logits, std::span<const double> targets) {
  Graph& g = logits.graph();
  const Tensor& x = logits.value();
  if (targets.size() != x.size()) throw Error(Errc::ShapeMismatch, "bce_with_logits: target count differs");
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    // max(x, 0) - x*t + log(1 + exp(-|x|))
    loss += std::max(x[i], 0.0) - x[i] * targets[i] + std::log1p(std::exp(-std::abs(x[i])));
  }
  const int il = logits.id();
  std::vector<double> t(targets.begin(), targets.end());
  return g.push(Tensor(1, 1, loss), g.requires_grad(il), "bce_with_logits",
                [il, t = std::move(t)](Graph& gr, int self) {
                  const double go = gr.grad(self)[0];
                  const Tensor& x = gr.value(il);
                  auto& gx = gr.grad(il);
                  for (std::size_t i = 0; i < t.size(); ++i) gx[i] += go * (sigmoid_scalar(x[i]) - t[i]);
                });
}

}  // namespace roundbuy::ad
