#pragma once

#include "autodiff/mat_ops.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace m2i2::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. Nodes that do not depend on a
// trainable leaf record no backward closure, so a graph built only from
// constants is a plain forward evaluator.
template <class M>
class Graph {
 public:
  using O = MatOps<M>;

  Var constant(M value) { return push(std::move(value), false, {}); }
  Var constant_primal(const Matrix& value) { return push(O::lift(value), false, {}); }
  Var parameter(M value) { return push(std::move(value), true, {}); }

  const M& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  const Matrix& primal(Var v) const { return O::primal(value(v)); }
  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }
  Index rows(Var v) const { return O::rows(value(v)); }
  Index cols(Var v) const { return O::cols(value(v)); }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward() root with respect to v; zeros if v did
  // not influence the root.
  M grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.has_grad) return n.grad;
    return O::zeros(O::rows(n.value), O::cols(n.value));
  }

  void backward(Var root) {
    Node& r = nodes_.at(static_cast<std::size_t>(root.id));
    expect_shape(O::rows(r.value) == 1 && O::cols(r.value) == 1, "backward root must be 1x1");
    for (auto& n : nodes_) n.has_grad = false;
    M seed = O::zeros(1, 1);
    seed_one(seed);
    r.grad = std::move(seed);
    r.has_grad = true;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.has_grad && n.backward) n.backward(*this, i);
    }
  }

  // ---- elementwise / algebraic ----
  Var add(Var a, Var b) {
    expect_same(a, b, "add");
    return unary_like(O::add(value(a), value(b)), {a, b}, [a, b](Graph& g, const M& gr) {
      g.send(a, gr);
      g.send(b, gr);
    });
  }
  Var sub(Var a, Var b) {
    expect_same(a, b, "sub");
    return unary_like(O::sub(value(a), value(b)), {a, b}, [a, b](Graph& g, const M& gr) {
      g.send(a, gr);
      g.send(b, O::neg(gr));
    });
  }
  Var mul(Var a, Var b) {
    expect_same(a, b, "mul");
    return unary_like(O::hadamard(value(a), value(b)), {a, b}, [a, b](Graph& g, const M& gr) {
      if (g.requires_grad(a)) g.send(a, O::hadamard(gr, g.value(b)));
      if (g.requires_grad(b)) g.send(b, O::hadamard(gr, g.value(a)));
    });
  }
  Var mul_const(Var a, const Matrix& c) {
    expect_shape(rows(a) == c.rows() && cols(a) == c.cols(), "mul_const");
    return unary_like(O::hadamard_const(value(a), c), {a}, [a, c](Graph& g, const M& gr) {
      g.send(a, O::hadamard_const(gr, c));
    });
  }
  Var scale(Var a, double s) {
    return unary_like(O::scale(value(a), s), {a}, [a, s](Graph& g, const M& gr) { g.send(a, O::scale(gr, s)); });
  }
  Var one_minus(Var a) {
    return unary_like(O::ones_minus(value(a)), {a}, [a](Graph& g, const M& gr) { g.send(a, O::neg(gr)); });
  }
  Var square(Var a) { return mul(a, a); }

  Var matmul(Var a, Var b) {
    expect_shape(cols(a) == rows(b), "matmul");
    return unary_like(O::matmul(value(a), value(b)), {a, b}, [a, b](Graph& g, const M& gr) {
      if (g.requires_grad(a)) g.send(a, O::matmul_nt(gr, g.value(b)));
      if (g.requires_grad(b)) g.send(b, O::matmul_tn(g.value(a), gr));
    });
  }
  // x (r x in) * w (in x out) + b (1 x out)
  Var linear(Var x, Var w, Var b) {
    expect_shape(cols(x) == rows(w) && rows(b) == 1 && cols(b) == cols(w), "linear");
    M out = O::add_row(O::matmul(value(x), value(w)), value(b));
    return unary_like(std::move(out), {x, w, b}, [x, w, b](Graph& g, const M& gr) {
      if (g.requires_grad(x)) g.send(x, O::matmul_nt(gr, g.value(w)));
      if (g.requires_grad(w)) g.send(w, O::matmul_tn(g.value(x), gr));
      if (g.requires_grad(b)) g.send(b, O::sum_rows(gr));
    });
  }

  // ---- nonlinearities ----
  Var sigmoid(Var a) {
    M s = O::sigmoid(value(a));
    return unary_like(std::move(s), {a}, [a](Graph& g, const M& gr) {
      M s = O::sigmoid(g.value(a));
      g.send(a, O::hadamard(gr, O::hadamard(s, O::ones_minus(s))));
    });
  }
  Var tanh(Var a) {
    return unary_like(O::tanh(value(a)), {a}, [a](Graph& g, const M& gr) {
      M t = O::tanh(g.value(a));
      g.send(a, O::hadamard(gr, O::ones_minus(O::hadamard(t, t))));
    });
  }
  Var relu(Var a) {
    Matrix mask = (O::primal(value(a)).array() > 0.0).template cast<double>().matrix();
    return unary_like(O::hadamard_const(value(a), mask), {a},
                      [a, mask](Graph& g, const M& gr) { g.send(a, O::hadamard_const(gr, mask)); });
  }
  Var elu(Var a) {
    return unary_like(O::elu(value(a)), {a},
                      [a](Graph& g, const M& gr) { g.send(a, O::hadamard(gr, O::elu_slope(g.value(a)))); });
  }
  Var abs(Var a) {
    Matrix sign = O::primal(value(a)).unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    return unary_like(O::hadamard_const(value(a), sign), {a},
                      [a, sign](Graph& g, const M& gr) { g.send(a, O::hadamard_const(gr, sign)); });
  }
  Var log(Var a) {
    return unary_like(O::log(value(a)), {a},
                      [a](Graph& g, const M& gr) { g.send(a, O::hadamard(gr, O::reciprocal(g.value(a)))); });
  }
  Var softmax_rows(Var a) {
    return unary_like(O::softmax_rows(value(a)), {a}, [a](Graph& g, const M& gr) {
      M p = O::softmax_rows(g.value(a));
      g.send(a, softmax_backward(p, gr));
    });
  }

  // ---- reductions ----
  Var sum(Var a) {
    const Index r = rows(a), c = cols(a);
    return unary_like(O::sum_all(value(a)), {a}, [a, r, c](Graph& g, const M& gr) {
      g.send(a, O::matmul(O::lift(Matrix::Ones(r, 1)), O::matmul(gr, O::lift(Matrix::Ones(1, c)))));
    });
  }
  // Mean over row groups: (groups*size x c) -> (groups x c).
  Var group_mean_rows(Var a, Index size) {
    expect_shape(size > 0 && rows(a) % size == 0, "group_mean_rows");
    const Index groups = rows(a) / size;
    Matrix pool = Matrix::Zero(groups, rows(a));
    for (Index gi = 0; gi < groups; ++gi) pool.block(gi, gi * size, 1, size).setConstant(1.0 / static_cast<double>(size));
    return left_const_matmul(pool, a);
  }
  // Constant-matrix product c (r x k) * a (k x m).
  Var left_const_matmul(const Matrix& c, Var a) {
    expect_shape(c.cols() == rows(a), "left_const_matmul");
    M lc = O::lift(c);
    return unary_like(O::matmul(lc, value(a)), {a}, [a, lc](Graph& g, const M& gr) { g.send(a, O::matmul_tn(lc, gr)); });
  }
  // Sum over columns: (r x c) -> (r x 1).
  Var sum_cols(Var a) {
    const Index c = cols(a);
    return unary_like(O::sum_cols(value(a)), {a}, [a, c](Graph& g, const M& gr) {
      g.send(a, O::matmul(gr, O::lift(Matrix::Ones(1, c))));
    });
  }

  // ---- shape plumbing ----
  Var concat_cols(const std::vector<Var>& parts) {
    expect_shape(!parts.empty(), "concat_cols of nothing");
    const Index r = rows(parts.front());
    Index total = 0;
    for (Var p : parts) {
      expect_shape(rows(p) == r, "concat_cols rows");
      total += cols(p);
    }
    M out = O::zeros(r, total);
    std::vector<Index> offsets;
    Index off = 0;
    for (Var p : parts) {
      O::add_block(out, 0, off, value(p));
      offsets.push_back(off);
      off += cols(p);
    }
    return unary_like(std::move(out), parts, [parts, offsets, r](Graph& g, const M& gr) {
      for (std::size_t i = 0; i < parts.size(); ++i)
        if (g.requires_grad(parts[i])) g.send(parts[i], O::block(gr, 0, offsets[i], r, g.cols(parts[i])));
    });
  }
  Var concat_rows(const std::vector<Var>& parts) {
    expect_shape(!parts.empty(), "concat_rows of nothing");
    const Index c = cols(parts.front());
    Index total = 0;
    for (Var p : parts) {
      expect_shape(cols(p) == c, "concat_rows cols");
      total += rows(p);
    }
    M out = O::zeros(total, c);
    std::vector<Index> offsets;
    Index off = 0;
    for (Var p : parts) {
      O::add_block(out, off, 0, value(p));
      offsets.push_back(off);
      off += rows(p);
    }
    return unary_like(std::move(out), parts, [parts, offsets, c](Graph& g, const M& gr) {
      for (std::size_t i = 0; i < parts.size(); ++i)
        if (g.requires_grad(parts[i])) g.send(parts[i], O::block(gr, offsets[i], 0, g.rows(parts[i]), c));
    });
  }
  Var slice_cols(Var a, Index start, Index count) {
    expect_shape(start >= 0 && start + count <= cols(a), "slice_cols");
    const Index r = rows(a), c = cols(a);
    return unary_like(O::block(value(a), 0, start, r, count), {a}, [a, start, r, c](Graph& g, const M& gr) {
      M full = O::zeros(r, c);
      O::add_block(full, 0, start, gr);
      g.send(a, full);
    });
  }
  Var slice_rows(Var a, Index start, Index count) {
    expect_shape(start >= 0 && start + count <= rows(a), "slice_rows");
    const Index r = rows(a), c = cols(a);
    return unary_like(O::block(value(a), start, 0, count, c), {a}, [a, start, r, c](Graph& g, const M& gr) {
      M full = O::zeros(r, c);
      O::add_block(full, start, 0, gr);
      g.send(a, full);
    });
  }
  // Row-major reinterpretation, e.g. (B*n x 1) -> (B x n).
  Var reshape(Var a, Index r, Index c) {
    expect_shape(r * c == rows(a) * cols(a), "reshape");
    const Index r0 = rows(a), c0 = cols(a);
    return unary_like(O::reshape(value(a), r, c), {a},
                      [a, r0, c0](Graph& g, const M& gr) { g.send(a, O::reshape(gr, r0, c0)); });
  }
  Var repeat_rows(Var a, Index times) {
    const Index r = rows(a);
    return unary_like(O::repeat_rows(value(a), times), {a}, [a, r, times](Graph& g, const M& gr) {
      Matrix fold = Matrix::Zero(r, r * times);
      for (Index i = 0; i < r; ++i) fold.block(i, i * times, 1, times).setOnes();
      g.send(a, O::matmul(O::lift(fold), gr));
    });
  }
  Var gather_rows(Var a, std::vector<Index> idx) {
    for (Index i : idx) expect_shape(i >= 0 && i < rows(a), "gather_rows index");
    const Index r = rows(a), c = cols(a);
    M out = O::gather_rows(value(a), idx);
    return unary_like(std::move(out), {a}, [a, idx, r, c](Graph& g, const M& gr) {
      M full = O::zeros(r, c);
      O::scatter_add_rows(full, gr, idx);
      g.send(a, full);
    });
  }
  // Selects one column per row: out(i) = a(i, col[i]).
  Var pick_cols(Var a, const std::vector<int>& col) {
    expect_shape(static_cast<Index>(col.size()) == rows(a), "pick_cols");
    Matrix onehot = Matrix::Zero(rows(a), cols(a));
    for (std::size_t i = 0; i < col.size(); ++i) {
      expect_shape(col[i] >= 0 && col[i] < cols(a), "pick_cols index");
      onehot(static_cast<Index>(i), col[i]) = 1.0;
    }
    return sum_cols(mul_const(a, onehot));
  }

  // ---- fused blocks ----

  // Scaled dot-product self-attention applied independently to consecutive
  // groups of `group` rows: softmax(Q K^T / sqrt(d_k)) V per group.
  Var grouped_attention(Var q, Var k, Var v, Index group) {
    expect_shape(group > 0 && rows(q) % group == 0, "attention group size");
    expect_shape(rows(q) == rows(k) && rows(q) == rows(v) && cols(q) == cols(k), "attention q/k/v");
    const Index groups = rows(q) / group;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cols(k)));
    const Index dv = cols(v);
    M out = O::zeros(rows(q), dv);
    for (Index gi = 0; gi < groups; ++gi) {
      const Index r0 = gi * group;
      M qg = O::block(value(q), r0, 0, group, cols(q));
      M kg = O::block(value(k), r0, 0, group, cols(k));
      M vg = O::block(value(v), r0, 0, group, dv);
      M p = O::softmax_rows(O::scale(O::matmul_nt(qg, kg), inv_sqrt));
      O::add_block(out, r0, 0, O::matmul(p, vg));
    }
    return unary_like(std::move(out), {q, k, v}, [q, k, v, group, groups, inv_sqrt, dv](Graph& g, const M& gr) {
      const Index dk = g.cols(k);
      M dq = O::zeros(g.rows(q), dk), dkm = O::zeros(g.rows(k), dk), dvm = O::zeros(g.rows(v), dv);
      for (Index gi = 0; gi < groups; ++gi) {
        const Index r0 = gi * group;
        M qg = O::block(g.value(q), r0, 0, group, dk);
        M kg = O::block(g.value(k), r0, 0, group, dk);
        M vg = O::block(g.value(v), r0, 0, group, dv);
        M p = O::softmax_rows(O::scale(O::matmul_nt(qg, kg), inv_sqrt));
        M go = O::block(gr, r0, 0, group, dv);
        O::add_block(dvm, r0, 0, O::matmul_tn(p, go));
        M dp = O::matmul_nt(go, vg);
        M ds = O::scale(softmax_backward(p, dp), inv_sqrt);
        O::add_block(dq, r0, 0, O::matmul(ds, kg));
        O::add_block(dkm, r0, 0, O::matmul_tn(ds, qg));
      }
      if (g.requires_grad(q)) g.send(q, dq);
      if (g.requires_grad(k)) g.send(k, dkm);
      if (g.requires_grad(v)) g.send(v, dvm);
    });
  }

  // Row-wise vector-matrix product: for each row b, out_b = x_b (1 x n) * W_b
  // where W_b is row b of w reshaped to (n x h).
  Var rowwise_vecmat(Var x, Var w, Index h) {
    const Index b = rows(x), n = cols(x);
    expect_shape(rows(w) == b && cols(w) == n * h, "rowwise_vecmat");
    // out = sum_i x[:, i] * W[:, i*h:(i+1)*h], row-scaled.
    M out = O::zeros(b, h);
    for (Index i = 0; i < n; ++i)
      O::accumulate(out, O::mul_col(O::block(value(w), 0, i * h, b, h), O::block(value(x), 0, i, b, 1)));
    return unary_like(std::move(out), {x, w}, [x, w, b, n, h](Graph& g, const M& gr) {
      M dx = O::zeros(b, n), dw = O::zeros(b, n * h);
      for (Index i = 0; i < n; ++i) {
        M wi = O::block(g.value(w), 0, i * h, b, h);
        O::add_block(dx, 0, i, O::sum_cols(O::hadamard(gr, wi)));
        O::add_block(dw, 0, i * h, O::mul_col(gr, O::block(g.value(x), 0, i, b, 1)));
      }
      if (g.requires_grad(x)) g.send(x, dx);
      if (g.requires_grad(w)) g.send(w, dw);
    });
  }

 private:
  struct Node {
    M value;
    M grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Graph&, int)> backward;
  };

  static void seed_one(Matrix& m) { m(0, 0) = 1.0; }
  static void seed_one(DualMatrix& m) { m.v(0, 0) = 1.0; }

  static M softmax_backward(const M& p, const M& gr) {
    M pg = O::hadamard(p, gr);
    M rowsum = O::sum_cols(pg);
    return O::sub(pg, O::mul_col(p, rowsum));
  }

  void expect_same(Var a, Var b, const char* what) const {
    expect_shape(rows(a) == rows(b) && cols(a) == cols(b), what);
  }

  Var push(M value, bool requires_grad, std::function<void(Graph&, int)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class F>
  Var unary_like(M value, const std::vector<Var>& inputs, F&& fn) {
    bool needs = false;
    for (Var in : inputs) needs = needs || requires_grad(in);
    if (!needs) return push(std::move(value), false, {});
    return push(std::move(value), true, [fn = std::forward<F>(fn)](Graph& g, int self) {
      M gr = g.nodes_[static_cast<std::size_t>(self)].grad;
      fn(g, gr);
    });
  }

  void send(Var to, const M& gr) {
    Node& n = nodes_[static_cast<std::size_t>(to.id)];
    if (!n.requires_grad) return;
    if (n.has_grad) {
      O::accumulate(n.grad, gr);
    } else {
      n.grad = gr;
      n.has_grad = true;
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace m2i2::ad
