#include "learner/losses.hpp"

#include "comm/comm_layer.hpp"

#include <stdexcept>

namespace m2i2::learner {

namespace {

Matrix stack_column(const Matrix& bt) {
  // B x T -> (T*B) x 1 with row t*B + b.
  Matrix out(bt.size(), 1);
  for (Index t = 0; t < bt.cols(); ++t)
    for (Index b = 0; b < bt.rows(); ++b) out(t * bt.rows() + b, 0) = bt(b, t);
  return out;
}

Matrix broadcast_rows(const Matrix& row_mask, Index cols) {
  return row_mask.col(0).replicate(1, cols);
}

}  // namespace

Index receiver_count(Index episodes, Index n_agents, const LearnerConfig& config) {
  const bool exclusive = config.exclusive_messages && config.comm != CommMode::none;
  return exclusive ? episodes * n_agents : episodes;
}

template <class M>
RecurrentState<M> initial_state(Graph<M>& g, Index episodes, Index n_agents, const LearnerConfig& config) {
  RecurrentState<M> s;
  if (config.comm == CommMode::drn_topk) s.drn = g.constant_primal(Matrix::Zero(episodes * n_agents, kHidden));
  if (config.comm != CommMode::none)
    s.encoder = g.constant_primal(Matrix::Zero(receiver_count(episodes, n_agents, config), kHidden));
  s.policy = g.constant_primal(Matrix::Zero(episodes * n_agents, kHidden));
  return s;
}

template <class M>
StepVars<M> forward_step(Graph<M>& g, const VarMap& p, const Matrix& obs_m, Index episodes, Index n,
                         const LearnerConfig& config, const Matrix* random_mask, RecurrentState<M>& state) {
  const Index D = obs_m.cols();
  ad::expect_shape(obs_m.rows() == episodes * n, "forward_step: obs rows must be episodes * n_agents");
  const bool exclusive = config.exclusive_messages && config.comm != CommMode::none;
  if (exclusive && n < 2) throw std::invalid_argument("exclusive messages need at least two agents");
  const Index receivers = receiver_count(episodes, n, config);
  StepVars<M> out;
  Var obs = g.constant_primal(obs_m);
  if (config.comm == CommMode::none) {
    out.z = g.constant_primal(Matrix::Zero(receivers, kZPerAgent * n));
  } else {
    Var msg;
    if (config.comm == CommMode::drn_topk) {
      auto d = comm::drn_step(g, p, obs, state.drn);
      state.drn = d.hidden;
      out.mask = comm::top_k_mask(g.primal(d.weights), comm::kept_dims(D, config.mask_ratio));
      msg = g.mul_const(g.mul_const(d.weights, out.mask), obs_m);
      out.weights = d.weights;
    } else {
      if (random_mask == nullptr) throw std::invalid_argument("random_mask communication needs a mask");
      ad::expect_shape(random_mask->rows() == episodes * n && random_mask->cols() == D, "random mask shape");
      out.mask = *random_mask;
      msg = g.constant_primal(obs_m.cwiseProduct(out.mask));
    }
    Index group = n;
    if (exclusive) {
      msg = g.gather_rows(msg, comm::exclusive_message_rows(episodes, n));
      group = n - 1;
    }
    auto e = comm::encoder_step(g, p, msg, group, state.encoder);
    state.encoder = e.hidden;
    out.z = e.z;
  }
  Var z_rows = exclusive ? out.z : g.repeat_rows(out.z, n);
  auto ps = models::policy_step(g, p, obs, z_rows, state.policy);
  state.policy = ps.hidden;
  out.q = ps.q;
  return out;
}

template <class M>
Unroll<M> unroll(Graph<M>& g, const VarMap& p, const EpisodeBatch& batch, const LearnerConfig& config,
                 const std::vector<Matrix>* random_masks) {
  const Index n = batch.n_agents, B = batch.episodes;
  const Index steps = batch.max_len + 1;
  if (config.comm == CommMode::random_mask) {
    if (random_masks == nullptr || static_cast<Index>(random_masks->size()) < steps)
      throw std::invalid_argument("random_mask communication needs one mask per step");
  }
  Unroll<M> u;
  u.receivers = receiver_count(B, n, config);
  RecurrentState<M> state = initial_state(g, B, n, config);
  for (Index t = 0; t < steps; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const Matrix* mask = config.comm == CommMode::random_mask ? &(*random_masks)[ut] : nullptr;
    StepVars<M> s = forward_step(g, p, batch.obs[ut], B, n, config, mask, state);
    u.z.push_back(s.z);
    u.q.push_back(s.q);
    if (s.weights.valid()) u.weights.push_back(s.weights);
    if (s.mask.size() > 0) u.masks.push_back(std::move(s.mask));
  }
  return u;
}

template <class M>
Var td_loss(Graph<M>& g, Var q_tot, const Matrix& y, const Matrix& mask) {
  ad::expect_shape(g.rows(q_tot) == y.rows() && g.cols(q_tot) == 1 && y.cols() == 1, "td_loss shapes");
  const double count = mask.sum();
  if (count <= 0.0) throw std::invalid_argument("td_loss: no valid transitions");
  Var err = g.sub(g.constant_primal(y), q_tot);
  return g.scale(g.sum(g.mul_const(g.square(err), mask)), 1.0 / count);
}

template <class M>
Var masked_mse(Graph<M>& g, Var pred, const Matrix& target, const Matrix& row_mask) {
  ad::expect_shape(g.rows(pred) == target.rows() && g.cols(pred) == target.cols(), "masked_mse shapes");
  ad::expect_shape(row_mask.rows() == target.rows() && row_mask.cols() == 1, "masked_mse mask");
  const double count = row_mask.sum() * static_cast<double>(target.cols());
  if (count <= 0.0) throw std::invalid_argument("masked_mse: no valid rows");
  Var err = g.sub(pred, g.constant_primal(target));
  return g.scale(g.sum(g.mul_const(g.square(err), broadcast_rows(row_mask, target.cols()))), 1.0 / count);
}

template <class M>
Var masked_cross_entropy(Graph<M>& g, Var probs, const Matrix& onehot, const Matrix& row_mask) {
  ad::expect_shape(g.rows(probs) == onehot.rows() && g.cols(probs) == onehot.cols(), "cross entropy shapes");
  const double count = row_mask.sum();
  if (count <= 0.0) throw std::invalid_argument("masked_cross_entropy: no valid rows");
  Matrix w = onehot.cwiseProduct(broadcast_rows(row_mask, onehot.cols()));
  return g.scale(g.sum(g.mul_const(g.log(probs), w)), -1.0 / count);
}

template <class M>
LossVars<M> build_losses(Graph<M>& g, const VarMap& p, const EpisodeBatch& batch, const Matrix& y,
                         const LearnerConfig& config, const std::vector<Matrix>* random_masks) {
  const Index n = batch.n_agents, B = batch.episodes, T = batch.max_len, S = batch.state_dim, A = batch.n_actions;
  ad::expect_shape(y.rows() == B && y.cols() == T, "td targets must be episodes x steps");
  Unroll<M> u = unroll(g, p, batch, config, random_masks);

  std::vector<Var> chosen;
  Matrix states(T * B, S);
  for (Index t = 0; t < T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    chosen.push_back(g.reshape(g.pick_cols(u.q[ut], batch.actions[ut]), B, n));
    states.block(t * B, 0, B, S) = batch.states[ut];
  }
  Var qs = g.concat_rows(chosen);
  Var q_tot = config.mixer == models::MixerKind::qmix ? models::qmix_forward(g, p, qs, g.constant_primal(states))
                                                      : models::vdn_forward(g, qs);
  LossVars<M> out;
  out.rl = td_loss(g, q_tot, stack_column(y), stack_column(batch.filled));
  out.total = out.rl;
  if (config.comm == CommMode::none) return out;

  const Index R = u.receivers;
  const Index per = R / B;  // receivers per episode
  std::vector<Var> z_now(u.z.begin(), u.z.begin() + T);
  Var zt = g.concat_rows(z_now);
  Matrix row_mask(T * R, 1);
  for (Index t = 0; t < T; ++t)
    for (Index r = 0; r < R; ++r) row_mask(t * R + r, 0) = batch.filled(r / per, t);

  std::vector<Var> aux;
  if (config.use_reconstruction) {
    Matrix target(T * R, S);
    for (Index t = 0; t < T; ++t)
      for (Index r = 0; r < R; ++r) target.row(t * R + r) = batch.states[static_cast<std::size_t>(t)].row(r / per);
    out.rc = masked_mse(g, models::decoder_forward(g, p, zt), target, row_mask);
    aux.push_back(out.rc);
  }
  if (config.use_inverse) {
    std::vector<Var> z_next(u.z.begin() + 1, u.z.end());
    Var probs = models::inverse_forward(g, p, zt, g.concat_rows(z_next), n, A);
    Matrix onehot = Matrix::Zero(T * R * n, A);
    Matrix prob_mask(T * R * n, 1);
    for (Index t = 0; t < T; ++t)
      for (Index r = 0; r < R; ++r) {
        const Index b = r / per;
        for (Index i = 0; i < n; ++i) {
          const Index row = (t * R + r) * n + i;
          onehot(row, batch.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(b * n + i)]) = 1.0;
          prob_mask(row, 0) = row_mask(t * R + r, 0);
        }
      }
    out.inv = config.inverse_loss == InverseLossKind::squared_error ? masked_mse(g, probs, onehot, prob_mask)
                                                                    : masked_cross_entropy(g, probs, onehot, prob_mask);
    aux.push_back(out.inv);
  }
  if (!aux.empty()) {
    Var sum_aux = aux.size() == 1 ? aux[0] : g.add(aux[0], aux[1]);
    out.total = g.add(out.rl, g.scale(sum_aux, config.beta));
  }
  return out;
}

Matrix td_targets_from(const Matrix& rewards, const Matrix& terminal, const Matrix& next_value, double gamma) {
  ad::expect_shape(rewards.rows() == terminal.rows() && rewards.cols() == terminal.cols(), "td targets terminal");
  ad::expect_shape(rewards.rows() == next_value.rows() && rewards.cols() == next_value.cols(), "td targets next");
  return rewards + gamma * (Matrix::Ones(rewards.rows(), rewards.cols()) - terminal).cwiseProduct(next_value);
}

Matrix target_max_qtot(const ParamBundle& bundle, const EpisodeBatch& batch, const LearnerConfig& config,
                       const std::vector<Matrix>* random_masks) {
  const Index n = batch.n_agents, B = batch.episodes, S = batch.state_dim;
  const Index steps = batch.max_len + 1;
  ParamSet params = bundle.target;
  if (config.comm == CommMode::drn_topk) {
    ParamSet drn = select_group(bundle.online, "drn");
    params.insert(drn.begin(), drn.end());
  }
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  Unroll<Matrix> u = unroll(g, p, batch, config, random_masks);
  Matrix qs(steps * B, n);
  Matrix states(steps * B, S);
  for (Index t = 0; t < steps; ++t) {
    const Matrix& q = g.primal(u.q[static_cast<std::size_t>(t)]);
    for (Index b = 0; b < B; ++b)
      for (Index i = 0; i < n; ++i) qs(t * B + b, i) = q.row(b * n + i).maxCoeff();
    states.block(t * B, 0, B, S) = batch.states[static_cast<std::size_t>(t)];
  }
  Var qv = g.constant_primal(qs);
  Var tot = config.mixer == models::MixerKind::qmix ? models::qmix_forward(g, p, qv, g.constant_primal(states))
                                                    : models::vdn_forward(g, qv);
  const Matrix& col = g.primal(tot);
  Matrix out(B, steps);
  for (Index t = 0; t < steps; ++t)
    for (Index b = 0; b < B; ++b) out(b, t) = col(t * B + b, 0);
  return out;
}

Matrix compute_td_targets(const ParamBundle& bundle, const EpisodeBatch& batch, const LearnerConfig& config,
                          const std::vector<Matrix>* random_masks) {
  Matrix next = target_max_qtot(bundle, batch, config, random_masks).rightCols(batch.max_len);
  return td_targets_from(batch.rewards, batch.terminal, next, config.gamma);
}

LossValues evaluate_losses(const ParamSet& online, const EpisodeBatch& batch, const Matrix& y,
                           const LearnerConfig& config, const std::vector<Matrix>* random_masks) {
  Graph<Matrix> g;
  VarMap p = bind_params(g, online, false);
  LossVars<Matrix> l = build_losses(g, p, batch, y, config, random_masks);
  LossValues v;
  v.total = g.primal(l.total)(0, 0);
  v.rl = g.primal(l.rl)(0, 0);
  if (l.rc.valid()) v.rc = g.primal(l.rc)(0, 0);
  if (l.inv.valid()) v.inv = g.primal(l.inv)(0, 0);
  return v;
}

std::vector<Matrix> draw_random_masks(const EpisodeBatch& batch, double mask_ratio, Rng& rng) {
  const Index k = comm::kept_dims(batch.obs_dim, mask_ratio);
  std::vector<Matrix> masks;
  masks.reserve(static_cast<std::size_t>(batch.max_len + 1));
  for (Index t = 0; t <= batch.max_len; ++t)
    masks.push_back(comm::random_mask(batch.episodes * batch.n_agents, batch.obs_dim, k, rng));
  return masks;
}

#define M2I2_INSTANTIATE(M)                                                                                      \
  template RecurrentState<M> initial_state<M>(Graph<M>&, Index, Index, const LearnerConfig&);                    \
  template StepVars<M> forward_step<M>(Graph<M>&, const VarMap&, const Matrix&, Index, Index, const LearnerConfig&, \
                                       const Matrix*, RecurrentState<M>&);                                        \
  template Unroll<M> unroll<M>(Graph<M>&, const VarMap&, const EpisodeBatch&, const LearnerConfig&,               \
                               const std::vector<Matrix>*);                                                       \
  template LossVars<M> build_losses<M>(Graph<M>&, const VarMap&, const EpisodeBatch&, const Matrix&,              \
                                       const LearnerConfig&, const std::vector<Matrix>*);                         \
  template Var td_loss<M>(Graph<M>&, Var, const Matrix&, const Matrix&);                                          \
  template Var masked_mse<M>(Graph<M>&, Var, const Matrix&, const Matrix&);                                       \
  template Var masked_cross_entropy<M>(Graph<M>&, Var, const Matrix&, const Matrix&);

M2I2_INSTANTIATE(Matrix)
M2I2_INSTANTIATE(DualMatrix)
#undef M2I2_INSTANTIATE

}  // namespace m2i2::learner
