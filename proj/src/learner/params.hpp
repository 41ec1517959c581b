#pragma once

#include "learner/learner_config.hpp"

#include <string>
#include <vector>

namespace m2i2::learner {

struct ModelDims {
  Index n_agents = 0;
  Index obs_dim = 0;
  Index state_dim = 0;
  Index n_actions = 0;

  Index z_dim() const { return kZPerAgent * n_agents; }
};

// online holds every trainable group (drn, encoder, decoder, inverse,
// policy, mixer) present for the variant; target mirrors encoder, policy
// and mixer under the same names.
struct ParamBundle {
  ParamSet online;
  ParamSet target;
};

ParamBundle init_bundle(const ModelDims& dims, const LearnerConfig& config, Rng& rng);

// Groups updated by the regular step (theta).
std::vector<std::string> theta_groups(const LearnerConfig& config);
// Groups that have target copies.
std::vector<std::string> target_groups(const LearnerConfig& config);

ParamSet select_groups(const ParamSet& params, const std::vector<std::string>& groups);
// Copies every tensor of `from` into `into` (keys must already exist).
void overwrite(ParamSet& into, const ParamSet& from);

// Elementwise helpers over identically keyed sets.
ParamSet axpy(const ParamSet& x, double alpha, const ParamSet& y);  // x + alpha * y
double global_norm(const ParamSet& p);
bool all_finite(const ParamSet& p);
ParamSet zeros_like(const ParamSet& p);

}  // namespace m2i2::learner
