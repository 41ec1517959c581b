#pragma once

#include "models/nn.hpp"

#include <vector>

// Policy network, state decoder, inverse (joint-action) model, and the
// value-decomposition mixers.
namespace m2i2::models {

enum class MixerKind { qmix, vdn };

void init_policy(ParamSet& params, Index obs_dim, Index n_agents, Index n_actions, Rng& rng);
void init_decoder(ParamSet& params, Index n_agents, Index state_dim, Rng& rng);
void init_inverse(ParamSet& params, Index n_agents, Index n_actions, Rng& rng);
void init_qmix(ParamSet& params, Index n_agents, Index state_dim, Rng& rng);

void validate_policy(const ParamSet& params, Index obs_dim, Index n_agents, Index n_actions);
void validate_decoder(const ParamSet& params, Index n_agents, Index state_dim);
void validate_inverse(const ParamSet& params, Index n_agents, Index n_actions);
void validate_qmix(const ParamSet& params, Index n_agents, Index state_dim);

// ---- single-sample API ----

struct PolicyOutput {
  Vector q;
  Vector hidden;
};

PolicyOutput policy_q_values(const ParamSet& params, const Vector& obs, const Vector& z, const Vector& hidden);
// Epsilon-greedy over available actions; argmax ties go to the lowest index.
int select_action(const Vector& q, const std::vector<bool>& avail, double epsilon, Rng& rng);
Vector decode_state(const ParamSet& params, const Vector& z);
// n_agents x n_actions; each row is a distribution.
Matrix predict_joint_action(const ParamSet& params, const Vector& z_t, const Vector& z_next, Index n_agents,
                            Index n_actions);
double mix_qmix(const ParamSet& params, const Vector& agent_qs, const Vector& state);
double mix_vdn(const Vector& agent_qs);

// ---- batched graph builders ----

template <class M>
struct PolicyStep {
  Var q;       // rows x n_actions
  Var hidden;  // rows x 32
};

template <class M>
PolicyStep<M> policy_step(Graph<M>& g, const VarMap& p, Var obs, Var z, Var hidden);

template <class M>
Var decoder_forward(Graph<M>& g, const VarMap& p, Var z);

// Returns per-agent action probabilities, (rows * n_agents) x n_actions.
template <class M>
Var inverse_forward(Graph<M>& g, const VarMap& p, Var z_t, Var z_next, Index n_agents, Index n_actions);

// agent_qs: episodes x n_agents, state: episodes x state_dim -> episodes x 1
template <class M>
Var qmix_forward(Graph<M>& g, const VarMap& p, Var agent_qs, Var state);

template <class M>
Var vdn_forward(Graph<M>& g, Var agent_qs);

}  // namespace m2i2::models
