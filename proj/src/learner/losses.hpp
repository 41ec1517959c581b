#pragma once

#include "learner/episode.hpp"
#include "learner/params.hpp"

#include <vector>

namespace m2i2::learner {

// Forward pass of communication + policy over a padded batch.
// A receiver is one episode (shared messages) or one agent (exclusive
// messages); z rows are indexed by receiver.
template <class M>
struct Unroll {
  Index receivers = 0;
  std::vector<Var> z;          // T+1 entries, receivers x 8n
  std::vector<Var> q;          // T+1 entries, (B*n) x A
  std::vector<Var> weights;    // T+1 entries, (B*n) x D; drn_topk only
  std::vector<Matrix> masks;   // T+1 entries, (B*n) x D; empty without communication
};

template <class M>
struct RecurrentState {
  Var drn;      // (B*n) x 32, drn_topk only
  Var encoder;  // receivers x 32
  Var policy;   // (B*n) x 32
};

template <class M>
struct StepVars {
  Var z;
  Var q;
  Var weights;  // invalid unless drn_topk
  Matrix mask;  // empty without communication
};

Index receiver_count(Index episodes, Index n_agents, const LearnerConfig& config);

template <class M>
RecurrentState<M> initial_state(Graph<M>& g, Index episodes, Index n_agents, const LearnerConfig& config);

// One time step of message construction, integration and policy for
// `episodes` x n_agents rows of obs. random_mask is required for random_mask
// communication. Advances `state`.
template <class M>
StepVars<M> forward_step(Graph<M>& g, const VarMap& p, const Matrix& obs, Index episodes, Index n_agents,
                         const LearnerConfig& config, const Matrix* random_mask, RecurrentState<M>& state);

// random_masks must hold T+1 entries of (B*n) x D when config.comm is
// random_mask and is ignored otherwise.
template <class M>
Unroll<M> unroll(Graph<M>& g, const VarMap& p, const EpisodeBatch& batch, const LearnerConfig& config,
                 const std::vector<Matrix>* random_masks);

template <class M>
struct LossVars {
  Var total;
  Var rl;
  Var rc;   // invalid when reconstruction is disabled
  Var inv;  // invalid when the inverse loss is disabled
};

// y: B x T TD targets, treated as constants.
template <class M>
LossVars<M> build_losses(Graph<M>& g, const VarMap& p, const EpisodeBatch& batch, const Matrix& y,
                         const LearnerConfig& config, const std::vector<Matrix>* random_masks);

// Masked mean squared TD error over real transitions.
template <class M>
Var td_loss(Graph<M>& g, Var q_tot, const Matrix& y, const Matrix& mask);
// Masked mean squared error over every element of the valid rows.
template <class M>
Var masked_mse(Graph<M>& g, Var pred, const Matrix& target, const Matrix& row_mask);
// Masked mean negative log-likelihood of the one-hot targets.
template <class M>
Var masked_cross_entropy(Graph<M>& g, Var probs, const Matrix& onehot, const Matrix& row_mask);

// r + gamma * (1 - terminal) * next_value, elementwise over B x T.
Matrix td_targets_from(const Matrix& rewards, const Matrix& terminal, const Matrix& next_value, double gamma);

// Target-network Q_tot of the greedy joint action at every step: B x (T+1).
// Communication in the target path uses the online DRN with the target
// encoder.
Matrix target_max_qtot(const ParamBundle& bundle, const EpisodeBatch& batch, const LearnerConfig& config,
                       const std::vector<Matrix>* random_masks);

Matrix compute_td_targets(const ParamBundle& bundle, const EpisodeBatch& batch, const LearnerConfig& config,
                          const std::vector<Matrix>* random_masks);

struct LossValues {
  double total = 0.0;
  double rl = 0.0;
  double rc = 0.0;
  double inv = 0.0;
};

LossValues evaluate_losses(const ParamSet& online, const EpisodeBatch& batch, const Matrix& y,
                           const LearnerConfig& config, const std::vector<Matrix>* random_masks);

// Fresh masks for the random_mask variant, one per step.
std::vector<Matrix> draw_random_masks(const EpisodeBatch& batch, double mask_ratio, Rng& rng);

}  // namespace m2i2::learner
