#pragma once

#include "models/nn.hpp"

namespace m2i2::learner {

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Keys of grads must be a subset of params; missing moments start at zero.
  void step(ParamSet& params, const ParamSet& grads);

  double lr() const { return lr_; }
  long steps() const { return t_; }
  const ParamSet& first_moment() const { return m_; }
  const ParamSet& second_moment() const { return v_; }
  void restore(long steps, ParamSet m, ParamSet v);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  ParamSet m_, v_;
};

}  // namespace m2i2::learner
