#include "learner/learner_config.hpp"

#include <algorithm>
#include <stdexcept>

namespace m2i2::learner {

void LearnerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("learner config: ") + what);
  };
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(beta >= 0.0, "beta must be non-negative");
  require(lr_theta >= 0.0 && lr_drn >= 0.0, "learning rates must be non-negative");
  require(batch_size > 0, "batch_size must be positive");
  require(buffer_capacity >= batch_size, "buffer_capacity must hold at least one batch");
  require(target_interval > 0, "target_interval must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start must lie in [0, 1]");
  require(epsilon_finish >= 0.0 && epsilon_finish <= 1.0, "epsilon_finish must lie in [0, 1]");
  require(epsilon_anneal >= 0, "epsilon_anneal must be non-negative");
  require(mask_ratio >= 0.0 && mask_ratio <= 1.0, "mask_ratio must lie in [0, 1]");
  require(grad_clip > 0.0, "grad_clip must be positive");
}

double epsilon_at(const LearnerConfig& config, long env_steps) {
  if (env_steps < 0) throw std::invalid_argument("epsilon_at: negative step count");
  if (config.epsilon_anneal == 0 || env_steps >= config.epsilon_anneal) return config.epsilon_finish;
  const double frac = static_cast<double>(env_steps) / static_cast<double>(config.epsilon_anneal);
  return config.epsilon_start + frac * (config.epsilon_finish - config.epsilon_start);
}

std::string to_string(CommMode mode) {
  switch (mode) {
    case CommMode::drn_topk: return "drn_topk";
    case CommMode::random_mask: return "random_mask";
    case CommMode::none: return "none";
  }
  return "unknown";
}

CommMode parse_comm_mode(const std::string& name) {
  if (name == "drn_topk") return CommMode::drn_topk;
  if (name == "random_mask") return CommMode::random_mask;
  if (name == "none") return CommMode::none;
  throw std::invalid_argument("unknown comm mode: " + name);
}

}  // namespace m2i2::learner
