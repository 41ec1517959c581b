#include "learner/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace m2i2::learner {

double clip_global_norm(ParamSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [k, v] : grads) sq += v.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [k, v] : grads) v *= s;
  }
  return norm;
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr < 0.0) throw std::invalid_argument("Adam: learning rate must be non-negative");
}

void Adam::step(ParamSet& params, const ParamSet& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [k, gr] : grads) {
    auto it = params.find(k);
    if (it == params.end()) throw std::out_of_range("Adam: gradient for unknown parameter " + k);
    Matrix& w = it->second;
    if (gr.rows() != w.rows() || gr.cols() != w.cols()) throw ad::ShapeError("Adam: gradient shape for " + k);
    auto [mi, m_new] = m_.try_emplace(k, Matrix::Zero(w.rows(), w.cols()));
    auto [vi, v_new] = v_.try_emplace(k, Matrix::Zero(w.rows(), w.cols()));
    mi->second = beta1_ * mi->second + (1.0 - beta1_) * gr;
    vi->second = beta2_ * vi->second + (1.0 - beta2_) * gr.cwiseProduct(gr);
    w.array() -= lr_ * (mi->second.array() / c1) / ((vi->second.array() / c2).sqrt() + eps_);
  }
}

void Adam::restore(long steps, ParamSet m, ParamSet v) {
  if (steps < 0) throw std::invalid_argument("Adam: negative step count");
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace m2i2::learner
