#include "harness/rollout.hpp"

#include "comm/comm_layer.hpp"

namespace m2i2::harness {

Controller::Controller(const ParamSet& params, const learner::LearnerConfig& config, Index n_agents)
    : params_(params), config_(config), n_(n_agents) {
  reset();
}

void Controller::reset() {
  const Index receivers = learner::receiver_count(1, n_, config_);
  drn_h_ = Matrix::Zero(n_, kHidden);
  enc_h_ = Matrix::Zero(receivers, kHidden);
  pol_h_ = Matrix::Zero(n_, kHidden);
}

Controller::Output Controller::step(const Matrix& obs, Rng& rng) {
  using learner::CommMode;
  Graph<Matrix> g;
  VarMap p = bind_params(g, params_, false);
  learner::RecurrentState<Matrix> state;
  if (config_.comm == CommMode::drn_topk) state.drn = g.constant_primal(drn_h_);
  if (config_.comm != CommMode::none) state.encoder = g.constant_primal(enc_h_);
  state.policy = g.constant_primal(pol_h_);
  Matrix mask;
  if (config_.comm == CommMode::random_mask)
    mask = comm::random_mask(n_, obs.cols(), comm::kept_dims(obs.cols(), config_.mask_ratio), rng);
  auto s = learner::forward_step(g, p, obs, 1, n_, config_, mask.size() > 0 ? &mask : nullptr, state);
  if (config_.comm == CommMode::drn_topk) drn_h_ = g.primal(state.drn);
  if (config_.comm != CommMode::none) enc_h_ = g.primal(state.encoder);
  pol_h_ = g.primal(state.policy);
  Output out;
  out.q = g.primal(s.q);
  if (s.weights.valid()) out.weights = g.primal(s.weights);
  out.mask = std::move(s.mask);
  out.z = g.primal(s.z);
  return out;
}

Matrix stack_obs(const std::vector<env::Vector>& obs) {
  if (obs.empty()) throw std::invalid_argument("stack_obs: no observations");
  Matrix m(static_cast<Index>(obs.size()), obs.front().size());
  for (std::size_t i = 0; i < obs.size(); ++i) m.row(static_cast<Index>(i)) = obs[i].transpose();
  return m;
}

RolloutResult run_episode(env::Env& environment, const ParamSet& params, const learner::LearnerConfig& config,
                          double epsilon, std::uint64_t env_seed, Rng& rng, EpisodeTrace* trace) {
  const auto& spec = environment.spec();
  Controller ctl(params, config, spec.n_agents);
  RolloutResult r;
  learner::Episode& ep = r.episode;
  env::ResetResult rr = environment.reset(env_seed);
  ep.obs.push_back(stack_obs(rr.obs));
  ep.states.push_back(rr.state);
  bool done = false;
  while (!done) {
    auto out = ctl.step(ep.obs.back(), rng);
    if (trace != nullptr) {
      trace->weights.push_back(out.weights);
      trace->masks.push_back(out.mask);
      trace->z.push_back(out.z);
    }
    std::vector<int> actions(static_cast<std::size_t>(spec.n_agents));
    for (int i = 0; i < spec.n_agents; ++i)
      actions[static_cast<std::size_t>(i)] =
          models::select_action(out.q.row(i).transpose(), environment.avail_actions(i), epsilon, rng);
    env::StepResult sr = environment.step(actions);
    ep.actions.push_back(std::move(actions));
    ep.rewards.push_back(sr.reward);
    ep.terminal.push_back(sr.terminated && !sr.truncated);
    ep.obs.push_back(stack_obs(sr.next_obs));
    ep.states.push_back(sr.next_state);
    done = sr.terminated;
    if (done) ep.won = sr.won;
  }
  if (trace != nullptr) {
    // z of the post-terminal observation completes the sequence.
    auto out = ctl.step(ep.obs.back(), rng);
    trace->weights.push_back(out.weights);
    trace->masks.push_back(out.mask);
    trace->z.push_back(out.z);
  }
  r.episode_return = ep.episode_return();
  r.won = ep.won;
  return r;
}

}  // namespace m2i2::harness
