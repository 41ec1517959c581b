#pragma once

#include "harness/config.hpp"
#include "learner/learner.hpp"

#include <string>

namespace m2i2::harness {

struct TrainCounters {
  long env_steps = 0;
  long episodes = 0;
  long next_eval = 0;
};

struct Checkpoint {
  KeyValues config;
  learner::ModelDims dims;
  TrainCounters counters;
  long updates = 0;
  ParamSet online;
  ParamSet target;
  long theta_steps = 0;
  ParamSet theta_m, theta_v;
  long drn_steps = 0;
  ParamSet drn_m, drn_v;
  std::string learner_rng;  // textual engine state
  std::string run_rng;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary blob plus a JSON manifest written next to it (<path>.json).
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::string rng_state(const Rng& rng);
void restore_rng(Rng& rng, const std::string& state);

}  // namespace m2i2::harness
