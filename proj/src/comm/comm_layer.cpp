#include "comm/comm_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace m2i2::comm {

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

void expect_gru(const ParamSet& p, const std::string& name, Index in, Index hidden) {
  expect_param(p, name + ".wi", in, 3 * hidden);
  expect_param(p, name + ".bi", 1, 3 * hidden);
  expect_param(p, name + ".wh", hidden, 3 * hidden);
  expect_param(p, name + ".bh", 1, 3 * hidden);
}

Matrix as_row(const Vector& v) { return v.transpose(); }

void check_k(Index k, Index d) {
  if (k < 0 || k > d) throw std::out_of_range("top-k: k must lie in [0, D]");
}

}  // namespace

Index kept_dims(Index obs_dim, double mask_ratio) {
  if (mask_ratio < 0.0 || mask_ratio > 1.0) throw std::out_of_range("mask_ratio must lie in [0, 1]");
  // Rounded before ceil so that e.g. 0.6 * 10 stays 6 despite binary fractions.
  const double raw = (1.0 - mask_ratio) * static_cast<double>(obs_dim);
  const double snapped = std::round(raw * 1e9) / 1e9;
  return std::min<Index>(obs_dim, static_cast<Index>(std::ceil(snapped)));
}

void init_drn(ParamSet& params, Index obs_dim, Rng& rng) {
  init_linear(params, "drn/fc1", obs_dim, kHidden, rng);
  init_gru(params, "drn/rnn", kHidden, kHidden, rng);
  init_linear(params, "drn/fc2", kHidden, obs_dim, rng);
}

void init_encoder(ParamSet& params, Index obs_dim, Index n_agents, Rng& rng) {
  init_linear(params, "encoder/q", obs_dim, kKeyDim, rng);
  init_linear(params, "encoder/k", obs_dim, kKeyDim, rng);
  init_linear(params, "encoder/v", obs_dim, kHidden, rng);
  init_gru(params, "encoder/rnn", kHidden, kHidden, rng);
  init_linear(params, "encoder/out", kHidden, kZPerAgent * n_agents, rng);
}

void validate_drn(const ParamSet& params, Index obs_dim) {
  expect_linear(params, "drn/fc1", obs_dim, kHidden);
  expect_gru(params, "drn/rnn", kHidden, kHidden);
  expect_linear(params, "drn/fc2", kHidden, obs_dim);
}

void validate_encoder(const ParamSet& params, Index obs_dim, Index n_agents) {
  expect_linear(params, "encoder/q", obs_dim, kKeyDim);
  expect_linear(params, "encoder/k", obs_dim, kKeyDim);
  expect_linear(params, "encoder/v", obs_dim, kHidden);
  expect_gru(params, "encoder/rnn", kHidden, kHidden);
  expect_linear(params, "encoder/out", kHidden, kZPerAgent * n_agents);
}

Matrix top_k_mask(const Matrix& weights, Index k) {
  check_k(k, weights.cols());
  Matrix mask = Matrix::Zero(weights.rows(), weights.cols());
  std::vector<Index> order(static_cast<std::size_t>(weights.cols()));
  for (Index r = 0; r < weights.rows(); ++r) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return weights(r, a) > weights(r, b); });
    for (Index j = 0; j < k; ++j) mask(r, order[static_cast<std::size_t>(j)]) = 1.0;
  }
  return mask;
}

Matrix random_mask(Index rows, Index obs_dim, Index k, Rng& rng) {
  check_k(k, obs_dim);
  Matrix mask = Matrix::Zero(rows, obs_dim);
  std::vector<Index> dims(static_cast<std::size_t>(obs_dim));
  for (Index r = 0; r < rows; ++r) {
    std::iota(dims.begin(), dims.end(), Index{0});
    for (Index j = 0; j < k; ++j) {
      std::uniform_int_distribution<Index> pick(j, obs_dim - 1);
      std::swap(dims[static_cast<std::size_t>(j)], dims[static_cast<std::size_t>(pick(rng))]);
      mask(r, dims[static_cast<std::size_t>(j)]) = 1.0;
    }
  }
  return mask;
}

template <class M>
DrnStep<M> drn_step(Graph<M>& g, const VarMap& p, Var obs, Var hidden) {
  Var x = g.relu(linear(g, p, "drn/fc1", obs));
  Var h = gru_cell(g, p, "drn/rnn", x, hidden);
  return {g.sigmoid(linear(g, p, "drn/fc2", h)), h};
}

template <class M>
EncoderStep<M> encoder_step(Graph<M>& g, const VarMap& p, Var messages, Index group, Var hidden) {
  ad::expect_shape(group > 0, "encoder needs at least one message per group");
  Var q = linear(g, p, "encoder/q", messages);
  Var k = linear(g, p, "encoder/k", messages);
  Var v = linear(g, p, "encoder/v", messages);
  Var attended = g.grouped_attention(q, k, v, group);
  Var pooled = g.group_mean_rows(attended, group);
  Var h = gru_cell(g, p, "encoder/rnn", pooled, hidden);
  return {linear(g, p, "encoder/out", h), h};
}

std::vector<Index> exclusive_message_rows(Index episodes, Index n_agents) {
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(episodes * n_agents * (n_agents - 1)));
  for (Index b = 0; b < episodes; ++b)
    for (Index i = 0; i < n_agents; ++i)
      for (Index j = 0; j < n_agents; ++j)
        if (j != i) rows.push_back(b * n_agents + j);
  return rows;
}

ImportanceWeights drn_forward(const ParamSet& params, const Vector& obs, const Vector& hidden, int agent) {
  validate_drn(select_group(params, "drn"), obs.size());
  ad::expect_shape(hidden.size() == kHidden, "drn hidden");
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  auto step = drn_step(g, p, g.constant(as_row(obs)), g.constant(as_row(hidden)));
  return {g.value(step.weights).row(0).transpose(), agent, g.value(step.hidden).row(0).transpose()};
}

FilteredWeights top_k_filter(const ImportanceWeights& weights, Index k) {
  Matrix row = as_row(weights.values);
  Matrix mask = top_k_mask(row, k);
  return {row.cwiseProduct(mask).row(0).transpose(), k};
}

FilteredWeights random_filter(Index obs_dim, Index k, Rng& rng) {
  return {random_mask(1, obs_dim, k, rng).row(0).transpose(), k};
}

Message build_message(const Vector& obs, const FilteredWeights& filtered, int sender) {
  ad::expect_shape(obs.size() == filtered.values.size(), "message obs/filter length");
  return {obs.cwiseProduct(filtered.values), sender};
}

IntegratedRepresentation encode_messages(const ParamSet& params, const std::vector<Message>& messages,
                                         const Vector& hidden) {
  if (messages.empty()) throw std::invalid_argument("encode_messages: empty message list");
  const Index d = messages.front().payload.size();
  Matrix m(static_cast<Index>(messages.size()), d);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    ad::expect_shape(messages[i].payload.size() == d, "message length");
    m.row(static_cast<Index>(i)) = messages[i].payload.transpose();
  }
  ad::expect_shape(hidden.size() == kHidden, "encoder hidden");
  Graph<Matrix> g;
  VarMap p = bind_params(g, params, false);
  auto step = encoder_step(g, p, g.constant(m), m.rows(), g.constant(as_row(hidden)));
  return {g.value(step.z).row(0).transpose(), g.value(step.hidden).row(0).transpose()};
}

template DrnStep<Matrix> drn_step<Matrix>(Graph<Matrix>&, const VarMap&, Var, Var);
template DrnStep<DualMatrix> drn_step<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var, Var);
template EncoderStep<Matrix> encoder_step<Matrix>(Graph<Matrix>&, const VarMap&, Var, Index, Var);
template EncoderStep<DualMatrix> encoder_step<DualMatrix>(Graph<DualMatrix>&, const VarMap&, Var, Index, Var);

}  // namespace m2i2::comm
