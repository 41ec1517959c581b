#pragma once

#include "learner/losses.hpp"
#include "learner/optim.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2i2::learner {

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gradient of the total loss with respect to the tensors of `wrt_groups`;
// every other tensor of `online` is held constant.
ParamSet loss_gradient(const ParamSet& online, const std::vector<std::string>& wrt_groups, const EpisodeBatch& batch,
                       const Matrix& y, const LearnerConfig& config, const std::vector<Matrix>* random_masks,
                       LossValues* values = nullptr);

struct MetaGradient {
  ParamSet grad;           // keyed like phi
  ParamSet trial_theta_grad;
  double trial_loss = 0.0;
};

// theta - step * theta_grad over the keys of theta_grad.
ParamSet trial_params(const ParamSet& theta, const ParamSet& theta_grad, double step);

namespace detail {
inline ParamSet primal_grads(const Graph<Matrix>& g, const VarMap& vars, const ParamSet& keys) {
  ParamSet out;
  for (const auto& [k, v] : keys) out.emplace(k, g.grad(vars.at(k)));
  return out;
}
}  // namespace detail

// d/dphi of L(theta - step * theta_grad(theta, phi), phi), where theta_grad
// is the supplied gradient of L in theta at (theta, phi). loss(g, vars) must
// build L on either tape from the tensors of theta and phi.
//   = grad_phi L(theta', phi) - step * (d/dtheta grad_phi L(theta, phi)) v,
//   v = grad_theta L(theta', phi)
template <class LossFn>
MetaGradient lookahead_meta_gradient(const ParamSet& theta, const ParamSet& theta_grad, const ParamSet& phi,
                                     double step, const LossFn& loss) {
  if (theta_grad.size() != theta.size()) throw std::invalid_argument("meta gradient: theta_grad must cover theta");
  MetaGradient out;
  ParamSet direct;
  {
    Graph<Matrix> g;
    VarMap vars = bind_params(g, trial_params(theta, theta_grad, step), true);
    VarMap pv = bind_params(g, phi, true);
    vars.insert(pv.begin(), pv.end());
    Var l = loss(g, vars);
    g.backward(l);
    out.trial_loss = g.primal(l)(0, 0);
    out.trial_theta_grad = detail::primal_grads(g, vars, theta);
    direct = detail::primal_grads(g, vars, phi);
  }
  ParamSet mixed;
  {
    // forward-over-reverse: theta carries tangent v, phi is the leaf
    Graph<DualMatrix> g;
    VarMap vars = bind_params(g, theta, false, &out.trial_theta_grad);
    VarMap pv = bind_params(g, phi, true);
    vars.insert(pv.begin(), pv.end());
    g.backward(loss(g, vars));
    for (const auto& [k, v] : phi) mixed.emplace(k, g.grad(vars.at(k)).d);
  }
  out.grad = axpy(direct, -step, mixed);
  return out;
}

// Exact derivative with respect to the drn weights phi of
//   L(theta - step * theta_grad, phi)
// for the combined loss on `batch` with fixed TD targets y.
MetaGradient meta_gradient(const ParamSet& online, const ParamSet& theta_grad, double step, const EpisodeBatch& batch,
                           const Matrix& y, const LearnerConfig& config);

struct UpdateStats {
  long update = 0;
  LossValues loss;
  double grad_norm = 0.0;
  bool meta_applied = false;
  double meta_grad_norm = 0.0;
  double meta_trial_loss = 0.0;
  bool targets_synced = false;
};

class Learner {
 public:
  Learner(const ModelDims& dims, const LearnerConfig& config, std::uint64_t seed);

  // One regular update of theta and, for the drn variant with meta updates
  // enabled, one meta update of phi. meta_batch replaces batch for the meta
  // step when config.meta_fresh_batch is set.
  UpdateStats update(const EpisodeBatch& batch, const EpisodeBatch* meta_batch = nullptr);
  // The two halves of update(), each touching only its own parameters.
  UpdateStats regular_update(const EpisodeBatch& batch);
  UpdateStats meta_update_drn(const EpisodeBatch& batch);
  void sync_targets();

  const ModelDims& dims() const { return dims_; }
  const LearnerConfig& config() const { return config_; }
  const ParamBundle& params() const { return bundle_; }
  ParamBundle& mutable_params() { return bundle_; }
  long updates() const { return updates_; }
  void set_updates(long n) { updates_ = n; }
  Adam& theta_optimizer() { return theta_opt_; }
  Adam& drn_optimizer() { return drn_opt_; }
  const Adam& theta_optimizer() const { return theta_opt_; }
  const Adam& drn_optimizer() const { return drn_opt_; }
  Rng& rng() { return rng_; }
  bool has_drn() const { return config_.comm == CommMode::drn_topk; }

 private:
  struct Prepared {
    std::vector<Matrix> masks;
    Matrix y;
    ParamSet g_theta;
    LossValues loss;
    const std::vector<Matrix>* mask_ptr() const { return masks.empty() ? nullptr : &masks; }
  };
  Prepared prepare(const EpisodeBatch& batch);
  ParamSet meta_step_gradient(const EpisodeBatch& batch, const Prepared& prep, UpdateStats& stats);
  void apply_theta(ParamSet g_theta, UpdateStats& stats);

  ModelDims dims_;
  LearnerConfig config_;
  Rng rng_;
  ParamBundle bundle_;
  Adam theta_opt_;
  Adam drn_opt_;
  long updates_ = 0;
};

}  // namespace m2i2::learner
