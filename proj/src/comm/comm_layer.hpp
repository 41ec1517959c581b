#pragma once

#include "models/nn.hpp"

#include <vector>

// Sending and receiving phases of the communication pipeline: importance
// scoring (DRN), top-k filtering, message construction, and attention-based
// integration of received messages.
namespace m2i2::comm {

struct ImportanceWeights {
  Vector values;  // each entry in (0, 1)
  int agent = 0;
  Vector hidden;  // DRN recurrent state after this step
};

struct FilteredWeights {
  Vector values;
  Index kept_count = 0;
};

struct Message {
  Vector payload;
  int sender = 0;
};

struct IntegratedRepresentation {
  Vector values;  // 8 * n_agents
  Vector hidden;  // encoder recurrent state after this step
};

// Number of transmitted dimensions: ceil((1 - mask_ratio) * obs_dim).
Index kept_dims(Index obs_dim, double mask_ratio);

void init_drn(ParamSet& params, Index obs_dim, Rng& rng);
void init_encoder(ParamSet& params, Index obs_dim, Index n_agents, Rng& rng);
// Throws ShapeError unless every tensor has its architectural shape.
void validate_drn(const ParamSet& params, Index obs_dim);
void validate_encoder(const ParamSet& params, Index obs_dim, Index n_agents);

// ---- single-agent / single-step API ----

ImportanceWeights drn_forward(const ParamSet& params, const Vector& obs, const Vector& hidden, int agent = 0);
FilteredWeights top_k_filter(const ImportanceWeights& weights, Index k);
FilteredWeights random_filter(Index obs_dim, Index k, Rng& rng);
Message build_message(const Vector& obs, const FilteredWeights& filtered, int sender = 0);
IntegratedRepresentation encode_messages(const ParamSet& params, const std::vector<Message>& messages,
                                         const Vector& hidden);

// ---- batched graph builders (rows = independent agents/episodes) ----

// 0/1 mask keeping the k largest entries of each row; ties go to the lower index.
Matrix top_k_mask(const Matrix& weights, Index k);
// 0/1 mask with exactly k uniformly chosen ones per row.
Matrix random_mask(Index rows, Index obs_dim, Index k, Rng& rng);

template <class M>
struct DrnStep {
  Var weights;
  Var hidden;
};

template <class M>
DrnStep<M> drn_step(Graph<M>& g, const VarMap& p, Var obs, Var hidden);

// messages holds consecutive groups of `group` rows; returns one integrated
// representation per group.
template <class M>
struct EncoderStep {
  Var z;
  Var hidden;
};

template <class M>
EncoderStep<M> encoder_step(Graph<M>& g, const VarMap& p, Var messages, Index group, Var hidden);

// Row indices that regroup (episodes*n) per-agent messages into per-receiver
// groups of the n-1 messages sent by the other agents.
std::vector<Index> exclusive_message_rows(Index episodes, Index n_agents);

}  // namespace m2i2::comm
