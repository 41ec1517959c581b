#pragma once

#include "harness/checkpoint.hpp"
#include "harness/config.hpp"
#include "harness/metrics.hpp"

#include <functional>
#include <string>

namespace m2i2::harness {

struct EvalSummary {
  int episodes = 0;
  std::optional<double> win_rate;
  double win_rate_stderr = 0.0;
  double mean_return = 0.0;
  double return_stderr = 0.0;
  double mean_length = 0.0;

  double performance() const { return win_rate ? *win_rate : mean_return; }
};

// Greedy (epsilon = 0) evaluation of fixed parameters.
EvalSummary evaluate_params(const env::EnvConfig& env_config, const ParamSet& params,
                            const learner::LearnerConfig& config, int episodes, std::uint64_t seed);
// Rebuilds the run configuration stored in the checkpoint and evaluates it.
EvalSummary evaluate_checkpoint(const std::string& path, int episodes, std::uint64_t seed);

// k/D for communicating variants, 0 without communication.
double comm_frequency(const learner::LearnerConfig& config, Index obs_dim);

struct TrainOptions {
  bool resume = false;  // continue from <run dir>/checkpoint.bin
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  std::string run_dir;
  MetricsRecord final_record;
  std::size_t parameter_count = 0;
  double wall_seconds = 0.0;
};

// Writes config.txt, metrics.jsonl, checkpoint.bin(+.json) and summary.json
// into the run directory.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

RunConfig config_from_checkpoint(const Checkpoint& ckpt);

}  // namespace m2i2::harness
