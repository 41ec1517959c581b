#pragma once

#include "env/env.hpp"
#include "learner/learner_config.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace m2i2::harness {

enum class Variant { m2i2, m2i2_no_drn, m2i2_no_drn_no_inv, qmix, vdn_m2i2 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
// Sets communication mode, mixer and auxiliary-loss switches for the variant.
void apply_variant(Variant v, learner::LearnerConfig& config);

struct RunConfig {
  env::EnvConfig env;
  Variant variant = Variant::m2i2;
  learner::LearnerConfig learner;
  long total_env_steps = 2000000;
  long eval_interval = 10000;
  int eval_episodes = 32;
  long checkpoint_interval = 0;  // env steps; 0 = final checkpoint only
  int episodes_per_update = 1;   // rollouts collected between learner updates
  std::uint64_t seed = 1;
  std::string name = "run";
  std::string output_dir;  // empty: <output root>/<name>

  // Learner config with the variant switches applied.
  learner::LearnerConfig effective_learner() const;
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; '#' starts a comment; blank lines ignored.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values_file(const std::string& path);
// Parses "key=value".
std::pair<std::string, std::string> parse_assignment(const std::string& text);

// Applies keys onto config; unknown keys or malformed values throw
// env::InvalidConfig.
void apply_key_values(RunConfig& config, const KeyValues& kv);
RunConfig load_run_config(const std::string& path, const KeyValues& overrides = {});
// Every key with its current value; round-trips through apply_key_values.
KeyValues to_key_values(const RunConfig& config);
std::string format_key_values(const KeyValues& kv);

// $M2I2_OUTPUT_ROOT, or "runs" when unset.
std::string output_root();
std::string resolve_run_dir(const RunConfig& config);

}  // namespace m2i2::harness
