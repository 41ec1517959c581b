#pragma once

#include "models/nn.hpp"

#include <deque>
#include <vector>

namespace m2i2::learner {

// One complete trajectory. obs/states hold length()+1 entries (the last is
// the post-terminal observation); actions/rewards hold length().
struct Episode {
  std::vector<Matrix> obs;     // n_agents x obs_dim per step
  std::vector<Vector> states;  // state_dim per step
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  std::vector<bool> terminal;  // env terminal (no bootstrap); time-limit cuts are not terminal
  bool won = false;

  Index length() const { return static_cast<Index>(actions.size()); }
  double episode_return() const;
};

// Time-major padded batch of B episodes; row b*n+i of a per-agent matrix
// is agent i of episode b.
struct EpisodeBatch {
  Index episodes = 0;
  Index max_len = 0;  // T
  Index n_agents = 0;
  Index obs_dim = 0;
  Index state_dim = 0;
  Index n_actions = 0;
  std::vector<Matrix> obs;                // T+1 entries, (B*n) x D
  std::vector<Matrix> states;             // T+1 entries, B x S
  std::vector<std::vector<int>> actions;  // T entries, B*n each
  Matrix rewards;                         // B x T
  Matrix terminal;                        // B x T, 1 = do not bootstrap
  Matrix filled;                          // B x T, 1 = real transition

  Index valid_steps() const { return static_cast<Index>(filled.sum()); }
};

// Pads every episode to max(len, pad_to) transitions.
EpisodeBatch make_batch(const std::vector<const Episode*>& episodes, Index n_actions, Index pad_to = 0);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // FIFO: at capacity the oldest episode is evicted.
  void insert(Episode episode);
  // Uniform, without replacement within one call.
  EpisodeBatch sample(std::size_t batch_size, Index n_actions, Rng& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_inserted() const { return inserted_; }
  const Episode& at(std::size_t i) const { return episodes_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t inserted_ = 0;
  std::deque<Episode> episodes_;
};

}  // namespace m2i2::learner
