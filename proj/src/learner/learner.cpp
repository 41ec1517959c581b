#include "learner/learner.hpp"

#include <cmath>

namespace m2i2::learner {

namespace {

bool loss_finite(const LossValues& v) {
  return std::isfinite(v.total) && std::isfinite(v.rl) && std::isfinite(v.rc) && std::isfinite(v.inv);
}

}  // namespace

ParamSet loss_gradient(const ParamSet& online, const std::vector<std::string>& wrt_groups, const EpisodeBatch& batch,
                       const Matrix& y, const LearnerConfig& config, const std::vector<Matrix>* random_masks,
                       LossValues* values) {
  ParamSet wrt = select_groups(online, wrt_groups);
  ParamSet rest;
  for (const auto& [k, v] : online)
    if (wrt.count(k) == 0) rest.emplace(k, v);
  Graph<Matrix> g;
  VarMap vars = bind_params(g, wrt, true);
  VarMap fixed = bind_params(g, rest, false);
  vars.insert(fixed.begin(), fixed.end());
  LossVars<Matrix> l = build_losses(g, vars, batch, y, config, random_masks);
  g.backward(l.total);
  if (values != nullptr) {
    values->total = g.primal(l.total)(0, 0);
    values->rl = g.primal(l.rl)(0, 0);
    values->rc = l.rc.valid() ? g.primal(l.rc)(0, 0) : 0.0;
    values->inv = l.inv.valid() ? g.primal(l.inv)(0, 0) : 0.0;
  }
  return detail::primal_grads(g, vars, wrt);
}

ParamSet trial_params(const ParamSet& theta, const ParamSet& theta_grad, double step) {
  ParamSet out = theta;
  for (auto& [k, v] : out) {
    auto it = theta_grad.find(k);
    if (it == theta_grad.end()) throw std::out_of_range("trial_params: missing gradient for " + k);
    v -= step * it->second;
  }
  return out;
}

MetaGradient meta_gradient(const ParamSet& online, const ParamSet& theta_grad, double step, const EpisodeBatch& batch,
                           const Matrix& y, const LearnerConfig& config) {
  if (config.comm != CommMode::drn_topk) throw std::invalid_argument("meta_gradient needs the drn variant");
  const ParamSet phi = select_group(online, "drn");
  const ParamSet theta = select_groups(online, theta_groups(config));
  return lookahead_meta_gradient(theta, theta_grad, phi, step, [&](auto& g, const VarMap& vars) {
    return build_losses(g, vars, batch, y, config, nullptr).total;
  });
}

Learner::Learner(const ModelDims& dims, const LearnerConfig& config, std::uint64_t seed)
    : dims_(dims), config_(config), rng_(seed), theta_opt_(config.lr_theta), drn_opt_(config.lr_drn) {
  config_.validate();
  if (dims.n_agents <= 0 || dims.obs_dim <= 0 || dims.state_dim <= 0 || dims.n_actions <= 0)
    throw std::invalid_argument("learner: dimensions must be positive");
  bundle_ = init_bundle(dims_, config_, rng_);
}

Learner::Prepared Learner::prepare(const EpisodeBatch& batch) {
  if (batch.n_agents != dims_.n_agents || batch.obs_dim != dims_.obs_dim || batch.state_dim != dims_.state_dim)
    throw ad::ShapeError("learner: batch does not match model dimensions");
  Prepared p;
  if (config_.comm == CommMode::random_mask) p.masks = draw_random_masks(batch, config_.mask_ratio, rng_);
  p.y = compute_td_targets(bundle_, batch, config_, p.mask_ptr());
  p.g_theta = loss_gradient(bundle_.online, theta_groups(config_), batch, p.y, config_, p.mask_ptr(), &p.loss);
  if (!loss_finite(p.loss) || !all_finite(p.g_theta)) throw NonFiniteError("non-finite loss or gradient in update");
  return p;
}

ParamSet Learner::meta_step_gradient(const EpisodeBatch& batch, const Prepared& prep, UpdateStats& stats) {
  MetaGradient meta = meta_gradient(bundle_.online, prep.g_theta, config_.lr_theta, batch, prep.y, config_);
  if (!std::isfinite(meta.trial_loss) || !all_finite(meta.grad)) throw NonFiniteError("non-finite meta gradient");
  stats.meta_grad_norm = clip_global_norm(meta.grad, config_.grad_clip);
  stats.meta_trial_loss = meta.trial_loss;
  stats.meta_applied = true;
  return std::move(meta.grad);
}

void Learner::apply_theta(ParamSet g_theta, UpdateStats& stats) {
  stats.grad_norm = clip_global_norm(g_theta, config_.grad_clip);
  theta_opt_.step(bundle_.online, g_theta);
  ++updates_;
  stats.update = updates_;
  if (updates_ % config_.target_interval == 0) {
    sync_targets();
    stats.targets_synced = true;
  }
}

UpdateStats Learner::update(const EpisodeBatch& batch, const EpisodeBatch* meta_batch) {
  UpdateStats stats;
  Prepared prep = prepare(batch);
  stats.loss = prep.loss;
  ParamSet g_phi;
  if (config_.meta_update && has_drn()) {
    if (config_.meta_fresh_batch && meta_batch != nullptr) {
      g_phi = meta_step_gradient(*meta_batch, prepare(*meta_batch), stats);
    } else {
      g_phi = meta_step_gradient(batch, prep, stats);
    }
  }
  // Both steps start from the same pre-update parameters.
  apply_theta(std::move(prep.g_theta), stats);
  if (stats.meta_applied) drn_opt_.step(bundle_.online, g_phi);
  if (!all_finite(bundle_.online)) throw NonFiniteError("non-finite parameters after update");
  return stats;
}

UpdateStats Learner::regular_update(const EpisodeBatch& batch) {
  UpdateStats stats;
  Prepared prep = prepare(batch);
  stats.loss = prep.loss;
  apply_theta(std::move(prep.g_theta), stats);
  if (!all_finite(bundle_.online)) throw NonFiniteError("non-finite parameters after update");
  return stats;
}

UpdateStats Learner::meta_update_drn(const EpisodeBatch& batch) {
  if (!has_drn()) throw std::logic_error("meta_update_drn: variant has no drn");
  UpdateStats stats;
  Prepared prep = prepare(batch);
  stats.loss = prep.loss;
  stats.update = updates_;
  ParamSet g_phi = meta_step_gradient(batch, prep, stats);
  drn_opt_.step(bundle_.online, g_phi);
  if (!all_finite(bundle_.online)) throw NonFiniteError("non-finite parameters after meta update");
  return stats;
}

void Learner::sync_targets() {
  overwrite(bundle_.target, select_groups(bundle_.online, target_groups(config_)));
}

}  // namespace m2i2::learner
