#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2i2::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// A matrix of dual numbers stored as two dense planes: the primal value and
// a single directional derivative. Running the reverse pass on DualMatrix
// yields directional derivatives of gradients (Hessian-vector products).
struct DualMatrix {
  Matrix v;
  Matrix d;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void expect_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(std::string("shape mismatch: ") + what);
}

// Uniform operation set over Matrix and DualMatrix. Everything the graph
// needs, forward and backward, goes through these so that the backward pass
// itself propagates tangents when M = DualMatrix.
template <class M>
struct MatOps;

template <>
struct MatOps<Matrix> {
  using M = Matrix;
  static M zeros(Index r, Index c) { return M::Zero(r, c); }
  static M lift(const Matrix& m) { return m; }
  static const Matrix& primal(const M& m) { return m; }
  static Index rows(const M& m) { return m.rows(); }
  static Index cols(const M& m) { return m.cols(); }

  static M add(const M& a, const M& b) { return a + b; }
  static M sub(const M& a, const M& b) { return a - b; }
  static M neg(const M& a) { return -a; }
  static M scale(const M& a, double s) { return a * s; }
  static void accumulate(M& acc, const M& a) { acc += a; }
  static M hadamard(const M& a, const M& b) { return a.cwiseProduct(b); }
  static M hadamard_const(const M& a, const Matrix& b) { return a.cwiseProduct(b); }
  // Tiny products skip the blocked GEMM path and its packing overhead.
  static bool tiny(Index m, Index k, Index n) { return m * k * n <= 4096; }
  static M matmul(const M& a, const M& b) {
    if (tiny(a.rows(), a.cols(), b.cols())) return a.lazyProduct(b);
    return a * b;
  }
  static M matmul_tn(const M& a, const M& b) {
    if (tiny(a.cols(), a.rows(), b.cols())) return a.transpose().lazyProduct(b);
    return a.transpose() * b;
  }
  static M matmul_nt(const M& a, const M& b) {
    if (tiny(a.rows(), a.cols(), b.rows())) return a.lazyProduct(b.transpose());
    return a * b.transpose();
  }
  static M transpose(const M& a) { return a.transpose(); }
  static M add_row(const M& a, const M& row) { return a.rowwise() + row.row(0); }
  static M sum_rows(const M& a) { return a.colwise().sum(); }
  static M sum_cols(const M& a) { return a.rowwise().sum(); }
  static M mul_col(const M& a, const M& col) {
    M out = a;
    for (Index i = 0; i < a.rows(); ++i) out.row(i) *= col(i, 0);
    return out;
  }
  static M sum_all(const M& a) {
    M out(1, 1);
    out(0, 0) = a.sum();
    return out;
  }
  static M ones_minus(const M& a) { return (1.0 - a.array()).matrix(); }

  static M sigmoid(const M& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }
  static M tanh(const M& a) { return a.array().tanh().matrix(); }
  static M exp(const M& a) { return a.array().exp().matrix(); }
  static M log(const M& a) { return a.array().log().matrix(); }
  static M reciprocal(const M& a) { return a.array().inverse().matrix(); }
  static M elu(const M& a) {
    return a.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  }
  // d elu / dx evaluated at a.
  static M elu_slope(const M& a) {
    return a.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
  }
  static M softmax_rows(const M& a) {
    M out(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i) {
      const double mx = a.row(i).maxCoeff();
      out.row(i) = (a.row(i).array() - mx).exp().matrix();
      out.row(i) /= out.row(i).sum();
    }
    return out;
  }

  static M block(const M& a, Index r0, Index c0, Index nr, Index nc) { return a.block(r0, c0, nr, nc); }
  static void add_block(M& acc, Index r0, Index c0, const M& src) {
    acc.block(r0, c0, src.rows(), src.cols()) += src;
  }
  static M reshape(const M& a, Index r, Index c) {
    return Eigen::Map<const M>(a.data(), r, c);
  }
  static M repeat_rows(const M& a, Index times) {
    M out(a.rows() * times, a.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index t = 0; t < times; ++t) out.row(i * times + t) = a.row(i);
    return out;
  }
  static M gather_rows(const M& a, const std::vector<Index>& idx) {
    M out(static_cast<Index>(idx.size()), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = a.row(idx[i]);
    return out;
  }
  static void scatter_add_rows(M& acc, const M& src, const std::vector<Index>& idx) {
    for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += src.row(static_cast<Index>(i));
  }
};

template <>
struct MatOps<DualMatrix> {
  using M = DualMatrix;
  static M zeros(Index r, Index c) { return {Matrix::Zero(r, c), Matrix::Zero(r, c)}; }
  static M lift(const Matrix& m) { return {m, Matrix::Zero(m.rows(), m.cols())}; }
  static const Matrix& primal(const M& m) { return m.v; }
  static Index rows(const M& m) { return m.v.rows(); }
  static Index cols(const M& m) { return m.v.cols(); }

  static M add(const M& a, const M& b) { return {a.v + b.v, a.d + b.d}; }
  static M sub(const M& a, const M& b) { return {a.v - b.v, a.d - b.d}; }
  static M neg(const M& a) { return {-a.v, -a.d}; }
  static M scale(const M& a, double s) { return {a.v * s, a.d * s}; }
  static void accumulate(M& acc, const M& a) {
    acc.v += a.v;
    acc.d += a.d;
  }
  static M hadamard(const M& a, const M& b) {
    return {a.v.cwiseProduct(b.v), a.d.cwiseProduct(b.v) + a.v.cwiseProduct(b.d)};
  }
  static M hadamard_const(const M& a, const Matrix& b) { return {a.v.cwiseProduct(b), a.d.cwiseProduct(b)}; }
  // tangents are often exactly zero (constants, phi-only paths)
  static bool zero(const Matrix& m) { return (m.array() == 0.0).all(); }
  template <class F>
  static M product(const M& a, const M& b, F f) {
    M out{f(a.v, b.v), Matrix()};
    const bool za = zero(a.d), zb = zero(b.d);
    if (za && zb) out.d = Matrix::Zero(out.v.rows(), out.v.cols());
    else if (za) out.d = f(a.v, b.d);
    else if (zb) out.d = f(a.d, b.v);
    else out.d = f(a.d, b.v) + f(a.v, b.d);
    return out;
  }
  static M matmul(const M& a, const M& b) {
    return product(a, b, [](const Matrix& x, const Matrix& y) { return MatOps<Matrix>::matmul(x, y); });
  }
  static M matmul_tn(const M& a, const M& b) {
    return product(a, b, [](const Matrix& x, const Matrix& y) { return MatOps<Matrix>::matmul_tn(x, y); });
  }
  static M matmul_nt(const M& a, const M& b) {
    return product(a, b, [](const Matrix& x, const Matrix& y) { return MatOps<Matrix>::matmul_nt(x, y); });
  }
  static M transpose(const M& a) { return {a.v.transpose(), a.d.transpose()}; }
  static M add_row(const M& a, const M& row) {
    return {a.v.rowwise() + row.v.row(0), a.d.rowwise() + row.d.row(0)};
  }
  static M sum_rows(const M& a) { return {a.v.colwise().sum(), a.d.colwise().sum()}; }
  static M sum_cols(const M& a) { return {a.v.rowwise().sum(), a.d.rowwise().sum()}; }
  static M mul_col(const M& a, const M& col) {
    M out = a;
    for (Index i = 0; i < a.v.rows(); ++i) {
      out.v.row(i) = a.v.row(i) * col.v(i, 0);
      out.d.row(i) = a.d.row(i) * col.v(i, 0) + a.v.row(i) * col.d(i, 0);
    }
    return out;
  }
  static M sum_all(const M& a) {
    M out{Matrix(1, 1), Matrix(1, 1)};
    out.v(0, 0) = a.v.sum();
    out.d(0, 0) = a.d.sum();
    return out;
  }
  static M ones_minus(const M& a) { return {(1.0 - a.v.array()).matrix(), -a.d}; }

  static M sigmoid(const M& a) {
    Matrix s = MatOps<Matrix>::sigmoid(a.v);
    Matrix slope = s.cwiseProduct((1.0 - s.array()).matrix());
    return {s, slope.cwiseProduct(a.d)};
  }
  static M tanh(const M& a) {
    Matrix t = a.v.array().tanh().matrix();
    return {t, (1.0 - t.array().square()).matrix().cwiseProduct(a.d)};
  }
  static M exp(const M& a) {
    Matrix e = a.v.array().exp().matrix();
    return {e, e.cwiseProduct(a.d)};
  }
  static M log(const M& a) { return {a.v.array().log().matrix(), a.d.cwiseQuotient(a.v)}; }
  static M reciprocal(const M& a) {
    Matrix r = a.v.array().inverse().matrix();
    return {r, -r.cwiseProduct(r).cwiseProduct(a.d)};
  }
  static M elu(const M& a) {
    return {MatOps<Matrix>::elu(a.v), MatOps<Matrix>::elu_slope(a.v).cwiseProduct(a.d)};
  }
  static M elu_slope(const M& a) {
    // slope is 1 on the positive side (zero tangent) and exp(x) otherwise
    Matrix s = MatOps<Matrix>::elu_slope(a.v);
    Matrix neg_part = a.v.unaryExpr([](double x) { return x > 0.0 ? 0.0 : std::exp(x); });
    return {s, neg_part.cwiseProduct(a.d)};
  }
  static M softmax_rows(const M& a) {
    Matrix p = MatOps<Matrix>::softmax_rows(a.v);
    Matrix pd = p.cwiseProduct(a.d);
    Matrix dp = pd - p.cwiseProduct(pd.rowwise().sum().replicate(1, p.cols()));
    return {p, dp};
  }

  static M block(const M& a, Index r0, Index c0, Index nr, Index nc) {
    return {a.v.block(r0, c0, nr, nc), a.d.block(r0, c0, nr, nc)};
  }
  static void add_block(M& acc, Index r0, Index c0, const M& src) {
    acc.v.block(r0, c0, src.v.rows(), src.v.cols()) += src.v;
    acc.d.block(r0, c0, src.d.rows(), src.d.cols()) += src.d;
  }
  static M reshape(const M& a, Index r, Index c) {
    return {MatOps<Matrix>::reshape(a.v, r, c), MatOps<Matrix>::reshape(a.d, r, c)};
  }
  static M repeat_rows(const M& a, Index times) {
    return {MatOps<Matrix>::repeat_rows(a.v, times), MatOps<Matrix>::repeat_rows(a.d, times)};
  }
  static M gather_rows(const M& a, const std::vector<Index>& idx) {
    return {MatOps<Matrix>::gather_rows(a.v, idx), MatOps<Matrix>::gather_rows(a.d, idx)};
  }
  static void scatter_add_rows(M& acc, const M& src, const std::vector<Index>& idx) {
    MatOps<Matrix>::scatter_add_rows(acc.v, src.v, idx);
    MatOps<Matrix>::scatter_add_rows(acc.d, src.d, idx);
  }
};

}  // namespace m2i2::ad
