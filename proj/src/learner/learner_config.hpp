#pragma once

#include "models/agent_models.hpp"

#include <string>

namespace m2i2::learner {

enum class CommMode {
  drn_topk,     // importance network + top-k filter
  random_mask,  // k uniformly random dimensions per step (unweighted)
  none,         // no communication; z is a zero vector
};

enum class InverseLossKind { squared_error, cross_entropy };

struct LearnerConfig {
  double gamma = 0.99;
  double beta = 1.0;
  double lr_theta = 5e-4;
  double lr_drn = 1e-4;
  int batch_size = 32;
  int buffer_capacity = 5000;
  int target_interval = 200;
  double epsilon_start = 1.0;
  double epsilon_finish = 0.05;
  int epsilon_anneal = 50000;
  double mask_ratio = 0.4;
  double grad_clip = 10.0;

  CommMode comm = CommMode::drn_topk;
  models::MixerKind mixer = models::MixerKind::qmix;
  bool use_reconstruction = true;
  bool use_inverse = true;
  bool meta_update = true;
  // Meta step draws its own batch instead of reusing the regular one.
  bool meta_fresh_batch = false;
  // Receivers integrate only the other agents' messages.
  bool exclusive_messages = false;
  InverseLossKind inverse_loss = InverseLossKind::squared_error;

  void validate() const;
};

// Linear anneal from epsilon_start to epsilon_finish over epsilon_anneal
// environment steps, constant afterwards.
double epsilon_at(const LearnerConfig& config, long env_steps);

std::string to_string(CommMode mode);
CommMode parse_comm_mode(const std::string& name);

}  // namespace m2i2::learner
