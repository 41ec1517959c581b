#include "learner/episode.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace m2i2::learner {

double Episode::episode_return() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

EpisodeBatch make_batch(const std::vector<const Episode*>& episodes, Index n_actions, Index pad_to) {
  if (episodes.empty()) throw std::invalid_argument("make_batch: no episodes");
  const Episode& first = *episodes.front();
  if (first.obs.empty()) throw std::invalid_argument("make_batch: episode without observations");
  EpisodeBatch b;
  b.episodes = static_cast<Index>(episodes.size());
  b.n_agents = first.obs.front().rows();
  b.obs_dim = first.obs.front().cols();
  b.state_dim = first.states.front().size();
  b.n_actions = n_actions;
  Index t_max = pad_to;
  for (const Episode* e : episodes) {
    if (static_cast<Index>(e->obs.size()) != e->length() + 1 || static_cast<Index>(e->states.size()) != e->length() + 1)
      throw std::invalid_argument("make_batch: episode needs length+1 observations and states");
    t_max = std::max(t_max, e->length());
  }
  b.max_len = t_max;
  const Index n = b.n_agents;
  b.obs.assign(static_cast<std::size_t>(t_max + 1), Matrix::Zero(b.episodes * n, b.obs_dim));
  b.states.assign(static_cast<std::size_t>(t_max + 1), Matrix::Zero(b.episodes, b.state_dim));
  b.actions.assign(static_cast<std::size_t>(t_max), std::vector<int>(static_cast<std::size_t>(b.episodes * n), 0));
  b.rewards = Matrix::Zero(b.episodes, t_max);
  b.terminal = Matrix::Zero(b.episodes, t_max);
  b.filled = Matrix::Zero(b.episodes, t_max);
  for (Index ei = 0; ei < b.episodes; ++ei) {
    const Episode& e = *episodes[static_cast<std::size_t>(ei)];
    for (Index t = 0; t <= e.length(); ++t) {
      const auto ut = static_cast<std::size_t>(t);
      if (e.obs[ut].rows() != n || e.obs[ut].cols() != b.obs_dim) throw std::invalid_argument("make_batch: obs shape");
      b.obs[ut].block(ei * n, 0, n, b.obs_dim) = e.obs[ut];
      b.states[ut].row(ei) = e.states[ut].transpose();
    }
    for (Index t = 0; t < e.length(); ++t) {
      const auto ut = static_cast<std::size_t>(t);
      for (Index i = 0; i < n; ++i) {
        const int a = e.actions[ut][static_cast<std::size_t>(i)];
        if (a < 0 || a >= n_actions) throw std::out_of_range("make_batch: action index out of range");
        b.actions[ut][static_cast<std::size_t>(ei * n + i)] = a;
      }
      b.rewards(ei, t) = e.rewards[ut];
      b.terminal(ei, t) = e.terminal[ut] ? 1.0 : 0.0;
      b.filled(ei, t) = 1.0;
    }
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::insert(Episode episode) {
  if (episode.length() == 0) throw std::invalid_argument("replay buffer: empty episode");
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
  ++inserted_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || episodes_.size() < batch_size)
    throw std::length_error("replay buffer holds fewer episodes than the requested batch");
  std::vector<std::size_t> idx(episodes_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch_size);
  return idx;
}

EpisodeBatch ReplayBuffer::sample(std::size_t batch_size, Index n_actions, Rng& rng) const {
  std::vector<const Episode*> picked;
  for (std::size_t i : sample_indices(batch_size, rng)) picked.push_back(&episodes_[i]);
  return make_batch(picked, n_actions);
}

}  // namespace m2i2::learner
