#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2i2::env {

using Vector = Eigen::VectorXd;

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Step after termination, step before reset, or a malformed joint action.
class EnvStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EnvSpec {
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int n_actions = 0;
  int episode_limit = 0;
};

struct ResetResult {
  Vector state;
  std::vector<Vector> obs;
};

struct StepResult {
  double reward = 0.0;
  bool terminated = false;
  // Terminated only because episode_limit was hit (bootstrapping stays valid).
  bool truncated = false;
  bool won = false;
  Vector next_state;
  std::vector<Vector> next_obs;
};

enum class EnvKind { hallway, hallwaygroup, predator_prey };

EnvKind parse_env_kind(const std::string& name);
std::string to_string(EnvKind kind);

struct HallwayConfig {
  std::vector<int> chain_lengths{4, 6, 8, 10};
  // Partition of agent indices; required (>= 2 groups) for hallwaygroup.
  std::vector<std::vector<int>> groups;

  static HallwayConfig group_default();  // 7 agents, (3,5,7) + (4,6,8,10)
};

struct PredatorPreyConfig {
  int grid_size = 10;
  int n_predators = 6;
  int n_preys = 6;
  int view_radius = 2;
  int episode_limit = 200;
  bool preys_move = true;

  static PredatorPreyConfig medium() { return {10, 6, 6, 2, 200, true}; }
  static PredatorPreyConfig hard() { return {15, 8, 8, 2, 200, true}; }
};

struct EnvConfig {
  EnvKind kind = EnvKind::hallway;
  HallwayConfig hallway;
  PredatorPreyConfig predator_prey;
};

// Actions: Hallway {0 stay, 1 left, 2 right}; Predator-Prey
// {0 stay, 1 up, 2 down, 3 left, 4 right}.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual ResetResult reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& joint_action) = 0;
  virtual std::vector<bool> avail_actions(int agent) const = 0;
  virtual bool reports_win_rate() const = 0;
};

std::unique_ptr<Env> make_env(const EnvConfig& config);

class Hallway : public Env {
 public:
  explicit Hallway(HallwayConfig config, bool grouped = false);

  const EnvSpec& spec() const override { return spec_; }
  ResetResult reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  std::vector<bool> avail_actions(int agent) const override;
  bool reports_win_rate() const override { return true; }

  const std::vector<int>& positions() const { return pos_; }
  // Places agents directly (scripted scenarios); resets the episode clock.
  void set_positions(const std::vector<int>& positions);
  // Inverse of the state encoding: one position per agent.
  std::vector<int> decode_state(const Vector& state) const;

  Vector state() const;
  std::vector<Vector> observations() const;

 private:
  void check_action(const std::vector<int>& joint_action) const;
  StepResult finish(double reward, bool terminated, bool won);

  HallwayConfig config_;
  bool grouped_;
  EnvSpec spec_;
  int max_len_ = 0;
  std::vector<int> pos_;
  std::vector<int> group_of_;
  std::vector<bool> group_done_;
  double earned_ = 0.0;
  int t_ = 0;
  bool started_ = false;
  bool done_ = false;
  std::mt19937_64 rng_;
};

class PredatorPrey : public Env {
 public:
  struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
  };

  explicit PredatorPrey(PredatorPreyConfig config);

  const EnvSpec& spec() const override { return spec_; }
  ResetResult reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  std::vector<bool> avail_actions(int agent) const override;
  bool reports_win_rate() const override { return false; }

  const std::vector<Cell>& predators() const { return predators_; }
  const std::vector<Cell>& preys() const { return preys_; }
  const std::vector<bool>& prey_alive() const { return alive_; }
  int alive_count() const;
  // Places units directly (scripted scenarios); all preys become alive.
  void set_positions(const std::vector<Cell>& predators, const std::vector<Cell>& preys);
  // Inverse of the state encoding.
  void decode_state(const Vector& state, std::vector<Cell>& predators, std::vector<Cell>& preys,
                    std::vector<bool>& alive) const;

  Vector state() const;
  std::vector<Vector> observations() const;

 private:
  Cell moved(Cell c, int action) const;

  PredatorPreyConfig config_;
  EnvSpec spec_;
  std::vector<Cell> predators_;
  std::vector<Cell> preys_;
  std::vector<bool> alive_;
  int t_ = 0;
  bool started_ = false;
  bool done_ = false;
  std::mt19937_64 rng_;
};

}  // namespace m2i2::env
