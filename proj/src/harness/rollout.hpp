#pragma once

#include "env/env.hpp"
#include "learner/episode.hpp"
#include "learner/losses.hpp"

#include <cstdint>
#include <vector>

namespace m2i2::harness {

// Decentralised execution of the shared policy: keeps the recurrent states
// of one episode and produces per-agent Q-values one step at a time. Holds
// a reference to params, which must outlive the controller and stay fixed
// during an episode.
class Controller {
 public:
  Controller(const ParamSet& params, const learner::LearnerConfig& config, Index n_agents);

  void reset();

  struct Output {
    Matrix q;        // n x A
    Matrix weights;  // n x D importance weights (drn_topk only)
    Matrix mask;     // n x D kept dimensions (empty without communication)
    Matrix z;        // receivers x 8n
  };
  Output step(const Matrix& obs, Rng& rng);

 private:
  const ParamSet& params_;
  learner::LearnerConfig config_;
  Index n_;
  Matrix drn_h_, enc_h_, pol_h_;
};

// Per-step record of communication internals for export.
struct EpisodeTrace {
  std::vector<Matrix> weights;
  std::vector<Matrix> masks;
  std::vector<Matrix> z;
};

struct RolloutResult {
  learner::Episode episode;
  double episode_return = 0.0;
  bool won = false;
};

Matrix stack_obs(const std::vector<env::Vector>& obs);

// Runs one episode with epsilon-greedy action selection. `rng` drives
// exploration and random masks; the environment is reset with env_seed.
RolloutResult run_episode(env::Env& environment, const ParamSet& params, const learner::LearnerConfig& config,
                          double epsilon, std::uint64_t env_seed, Rng& rng, EpisodeTrace* trace = nullptr);

}  // namespace m2i2::harness
