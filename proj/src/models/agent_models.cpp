#include "models/agent_models.hpp"

#include <stdexcept>

namespace m2i2::models {

namespace {

void expect_param(const ParamSet& p, const std::string& key, Index r, Index c) {
  auto it = p.find(key);
  ad::expect_shape(it != p.end(), ("missing " + key).c_str());
  ad::expect_shape(it->second.rows() == r && it->second.cols() == c, key.c_str());
}

void expect_linear(const ParamSet& p, const std::string& name, Index in, Index out) {
  expect_param(p, name + ".w", in, out);
  expect_param(p, name + ".b", 1, out);
}

Matrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace

void init_policy(ParamSet& params, Index obs_dim, Index n_agents, Index n_actions, Rng& rng) {
  init_linear(params, "policy/fc1", obs_dim, kHidden, rng);
  init_linear(params, "policy/fc2", kHidden + kZPerAgent * n_agents, kHidden, rng);
  init_gru(params, "policy/rnn", kHidden, kHidden, rng);
  init_linear(params, "policy/head", kHidden, n_actions, rng);
}

void init_decoder(ParamSet& params, Index n_agents, Index state_dim, Rng& rng) {
  init_linear(params, "decoder/fc1", kZPerAgent * n_agents, kHidden, rng);
  init_linear(params, "decoder/fc2", kHidden, state_dim, rng);
}

void init_inverse(ParamSet& params, Index n_agents, Index n_actions, Rng& rng) {
  init_linear(params, "inverse/embed", kZPerAgent * n_agents, kInverseHidden, rng);
  init_linear(params, "inverse/fc", 2 * kInverseHidden, kInverseHidden, rng);
  init_linear(params, "inverse/head", kInverseHidden, n_agents * n_actions, rng);
}

void init_qmix(ParamSet& params, Index n_agents, Index state_dim, Rng& rng) {
  init_linear(params, "mixer/hyper_w1", state_dim, n_agents * kMixHidden, rng);
  init_linear(params, "mixer/hyper_b1", state_dim, kMixHidden, rng);
  init_linear(params, "mixer/hyper_w2", state_dim, kMixHidden, rng);
  init_linear(params, "mixer/v1", state_dim, kMixHidden, rng);
  init_linear(params, "mixer/v2", kMixHidden, 1, rng);
}

void validate_policy(const ParamSet& params, Index obs_dim, Index n_agents, Index n_actions) {
  expect_linear(params, "policy/fc1", obs_dim, kHidden);
  expect_linear(params, "policy/fc2", kHidden + kZPerAgent * n_agents, kHidden);
  expect_param(params, "policy/rnn.wi", kHidden, 3 * kHidden);
  expect_param(params, "policy/rnn.wh", kHidden, 3 * kHidden);
  expect_linear(params, "policy/head", kHidden, n_actions);
}

void validate_decoder(const ParamSet& params, Index n_agents, Index state_dim) {
  expect_linear(params, "decoder/fc1", kZPerAgent * n_agents, kHidden);
  expect_linear(params, "decoder/fc2", kHidden, state_dim);
}

void validate_inverse(const ParamSet& params, Index n_agents, Index n_actions) {
  expect_linear(params, "inverse/embed", kZPerAgent * n_agents, kInverseHidden);
  expect_linear(params, "inverse/fc", 2 * kInverseHidden, kInverseHidden);
  expect_linear(params, "inverse/head", kInverseHidden, n_agents * n_actions);
}

void validate_qmix(const ParamSet& params, Index n_agents, Index state_dim) {
  expect_linear(params, "mixer/hyper_w1", state_dim, n_agents * kMixHidden);
  expect_linear(params, "mixer/hyper_b1", state_dim, kMixHidden);
  expect_linear(params, "mixer/hyper_w2", state_dim, kMixHidden);
  expect_linear(params, "mixer/v1", state_dim, kMixHidden);
  expect_linear(params, "mixer/v2", kMixHidden, 1);
}

template <class M>
PolicyStep<M> policy_step(Graph<M>& g, const VarMap& p, Var obs, Var z, Var hidden) {
  Var e = g.relu(linear(g, p, "policy/fc1", obs));
  Var x = g.relu(linear(g, p, "policy/fc2", g.concat_cols({e, z})));
  Var h = gru_cell(g, p, "policy/rnn", x, hidden);
  return {linear(g, p, "policy/head", h), h};
}

template <class M>
Var decoder_forward(Graph<M>& g, const VarMap& p, Var z) {
  return linear(g, p, "decoder/fc2", g.relu(linear(g, p, "decoder/fc1", z)));
}

template <class M>
Var inverse_forward(Graph<M>& g, const VarMap& p, Var z_t, Var z_next, Index n_agents, Index n_actions) {
  Var e0 = g.relu(linear(g, p, "inverse/embed", z_t));
  Var e1 = g.relu(linear(g, p, "inverse/embed", z_next));
  Var h = g.relu(linear(g, p, "inverse/fc", g.concat_cols({e0, e1})));
  Var logits = linear(g, p, "inverse/head", h);
  return g.softmax_rows(g.reshape(logits, g.rows(logits) * n_agents, n_actions));
}

template <class M>
Var qmix_forward(Graph<M>& g, const VarMap& p, Var agent_qs, Var state) {
  ad::expect_shape(g.rows(agent_qs) == g.rows(state), "qmix qs/state rows");
  Var w1 = g.abs(linear(g, p, "mixer/hyper_w1", state));
  Var b1 = linear(g, p, "mixer/hyper_b1", state);
  Var hidden = g.elu(g.add(g.rowwise_vecmat(agent_qs, w1, kMixHidden), b1));
  Var w2 = g.abs(linear(g, p, "mixer/hyper_w2", state));
  Var v = linear(g, p, "mixer/v2", g.relu(linear(g, p, "mixer/v1", state)));
  return g.add(g.sum_cols(g.mul(hidden, w2)), v);
}

template <class M>
Var vdn_forward(Graph<M>& g, Var agent_qs) {
  return g.sum_cols(agent_qs);
}

PolicyOutput policy_q_values(const ParamSet& params, const Vector& obs, const Vector& z, const Vector& hidden) {
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  auto step = policy_step(g, p, g.constant(as_row(obs)), g.constant(as_row(z)), g.constant(as_row(hidden)));
  return {g.value(step.q).row(0).transpose(), g.value(step.hidden).row(0).transpose()};
}

int select_action(const Vector& q, const std::vector<bool>& avail, double epsilon, Rng& rng) {
  if (static_cast<Index>(avail.size()) != q.size()) throw ad::ShapeError("select_action: avail/q length");
  if (epsilon < 0.0 || epsilon > 1.0) throw std::out_of_range("select_action: epsilon must lie in [0, 1]");
  std::vector<int> legal;
  for (std::size_t a = 0; a < avail.size(); ++a)
    if (avail[a]) legal.push_back(static_cast<int>(a));
  if (legal.empty()) throw std::invalid_argument("select_action: no available actions");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    return legal[pick(rng)];
  }
  int best = legal.front();
  for (int a : legal)
    if (q(a) > q(best)) best = a;
  return best;
}

Vector decode_state(const ParamSet& params, const Vector& z) {
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  return g.value(decoder_forward(g, p, g.constant(as_row(z)))).row(0).transpose();
}

Matrix predict_joint_action(const ParamSet& params, const Vector& z_t, const Vector& z_next, Index n_agents,
                            Index n_actions) {
  ad::expect_shape(z_t.size() == z_next.size(), "inverse z lengths");
  validate_inverse(select_group(params, "inverse"), n_agents, n_actions);
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  return g.value(inverse_forward(g, p, g.constant(as_row(z_t)), g.constant(as_row(z_next)), n_agents, n_actions));
}

double mix_qmix(const ParamSet& params, const Vector& agent_qs, const Vector& state) {
  validate_qmix(select_group(params, "mixer"), agent_qs.size(), state.size());
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  return g.value(qmix_forward(g, p, g.constant(as_row(agent_qs)), g.constant(as_row(state))))(0, 0);
}

double mix_vdn(const Vector& agent_qs) {
  if (agent_qs.size() == 0) throw std::invalid_argument("mix_vdn: no agents");
  return agent_qs.sum();
}

template PolicyStep<Matrix> policy_step<Matrix>(Graph<Matrix>&, const VarMap&, Var, Var, Var);
template PolicyStep<DualMatrix> policy_step<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var, Var, Var);
template Var decoder_forward<Matrix>(Graph<Matrix>&, const VarMap&, Var);
template Var decoder_forward<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var);
template Var inverse_forward<Matrix>(Graph<Matrix>&, const VarMap&, Var, Var, Index, Index);
template Var inverse_forward<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var, Var, Index, Index);
template Var qmix_forward<Matrix>(Graph<Matrix>&, const VarMap&, Var, Var);
template Var qmix_forward<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var, Var);
template Var vdn_forward<Matrix>(Graph<Matrix>&, Var);
template Var vdn_forward<DualMatrix>(Graph<DualMatrix>&, Var);

}  // namespace m2i2::models
