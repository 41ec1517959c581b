#include "env/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace m2i2::env {

PredatorPrey::PredatorPrey(PredatorPreyConfig config) : config_(config) {
  if (config_.grid_size <= 0 || config_.n_predators <= 0 || config_.n_preys <= 0 || config_.view_radius < 0 ||
      config_.episode_limit <= 0)
    throw InvalidConfig("predator_prey: sizes must be positive");
  if (config_.grid_size < 2 * config_.view_radius + 1)
    throw InvalidConfig("predator_prey: grid_size must be >= 2*view_radius+1");
  const long cells = static_cast<long>(config_.grid_size) * config_.grid_size;
  if (cells < config_.n_predators + config_.n_preys) throw InvalidConfig("predator_prey: grid too small for all units");

  const int window = 2 * config_.view_radius + 1;
  spec_.n_agents = config_.n_predators;
  spec_.n_actions = 5;
  spec_.obs_dim = window * window * 2 + 2 + config_.n_predators;
  spec_.state_dim = 2 * config_.n_predators + 3 * config_.n_preys;
  spec_.episode_limit = config_.episode_limit;
  predators_.resize(static_cast<std::size_t>(config_.n_predators));
  preys_.resize(static_cast<std::size_t>(config_.n_preys));
  alive_.assign(static_cast<std::size_t>(config_.n_preys), true);
}

int PredatorPrey::alive_count() const {
  return static_cast<int>(std::count(alive_.begin(), alive_.end(), true));
}

Vector PredatorPrey::state() const {
  const double norm = config_.grid_size > 1 ? 1.0 / (config_.grid_size - 1) : 1.0;
  Vector s(spec_.state_dim);
  Eigen::Index k = 0;
  for (const Cell& c : predators_) {
    s(k++) = c.x * norm;
    s(k++) = c.y * norm;
  }
  for (std::size_t j = 0; j < preys_.size(); ++j) {
    s(k++) = preys_[j].x * norm;
    s(k++) = preys_[j].y * norm;
    s(k++) = alive_[j] ? 1.0 : 0.0;
  }
  return s;
}

void PredatorPrey::decode_state(const Vector& state, std::vector<Cell>& predators, std::vector<Cell>& preys,
                                std::vector<bool>& alive) const {
  if (state.size() != spec_.state_dim) throw EnvStateError("predator_prey: state length mismatch");
  const double scale = config_.grid_size - 1;
  auto cell = [&](Eigen::Index k) {
    return Cell{static_cast<int>(std::lround(state(k) * scale)), static_cast<int>(std::lround(state(k + 1) * scale))};
  };
  predators.clear();
  preys.clear();
  alive.clear();
  Eigen::Index k = 0;
  for (int i = 0; i < config_.n_predators; ++i, k += 2) predators.push_back(cell(k));
  for (int j = 0; j < config_.n_preys; ++j, k += 3) {
    preys.push_back(cell(k));
    alive.push_back(state(k + 2) > 0.5);
  }
}

std::vector<Vector> PredatorPrey::observations() const {
  const int r = config_.view_radius;
  const int window = 2 * r + 1;
  const double norm = config_.grid_size > 1 ? 1.0 / (config_.grid_size - 1) : 1.0;
  std::vector<Vector> obs;
  for (int i = 0; i < config_.n_predators; ++i) {
    Vector o = Vector::Zero(spec_.obs_dim);
    const Cell me = predators_[static_cast<std::size_t>(i)];
    auto slot = [&](const Cell& c) -> int {
      const int dx = c.x - me.x, dy = c.y - me.y;
      if (std::abs(dx) > r || std::abs(dy) > r) return -1;
      return (dy + r) * window + (dx + r);
    };
    for (int j = 0; j < config_.n_predators; ++j) {
      if (j == i) continue;
      const int s = slot(predators_[static_cast<std::size_t>(j)]);
      if (s >= 0) o(s) += 1.0;
    }
    for (std::size_t j = 0; j < preys_.size(); ++j) {
      if (!alive_[j]) continue;
      const int s = slot(preys_[j]);
      if (s >= 0) o(window * window + s) += 1.0;
    }
    o(2 * window * window) = me.x * norm;
    o(2 * window * window + 1) = me.y * norm;
    o(2 * window * window + 2 + i) = 1.0;
    obs.push_back(std::move(o));
  }
  return obs;
}

ResetResult PredatorPrey::reset(std::uint64_t seed) {
  rng_.seed(seed);
  const int g = config_.grid_size;
  std::vector<int> cells(static_cast<std::size_t>(g * g));
  for (int c = 0; c < g * g; ++c) cells[static_cast<std::size_t>(c)] = c;
  // Partial Fisher-Yates: distinct cells for every unit.
  const int units = config_.n_predators + config_.n_preys;
  for (int i = 0; i < units; ++i) {
    std::uniform_int_distribution<int> d(i, g * g - 1);
    std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(d(rng_))]);
  }
  for (int i = 0; i < config_.n_predators; ++i) {
    const int c = cells[static_cast<std::size_t>(i)];
    predators_[static_cast<std::size_t>(i)] = {c % g, c / g};
  }
  for (int j = 0; j < config_.n_preys; ++j) {
    const int c = cells[static_cast<std::size_t>(config_.n_predators + j)];
    preys_[static_cast<std::size_t>(j)] = {c % g, c / g};
  }
  alive_.assign(static_cast<std::size_t>(config_.n_preys), true);
  t_ = 0;
  started_ = true;
  done_ = false;
  return {state(), observations()};
}

void PredatorPrey::set_positions(const std::vector<Cell>& predators, const std::vector<Cell>& preys) {
  if (predators.size() != predators_.size() || preys.size() != preys_.size())
    throw EnvStateError("predator_prey: wrong unit count");
  auto inside = [&](const Cell& c) { return c.x >= 0 && c.y >= 0 && c.x < config_.grid_size && c.y < config_.grid_size; };
  for (const Cell& c : predators)
    if (!inside(c)) throw EnvStateError("predator_prey: predator off grid");
  for (const Cell& c : preys)
    if (!inside(c)) throw EnvStateError("predator_prey: prey off grid");
  predators_ = predators;
  preys_ = preys;
  alive_.assign(preys_.size(), true);
  t_ = 0;
  started_ = true;
  done_ = false;
}

std::vector<bool> PredatorPrey::avail_actions(int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw std::out_of_range("predator_prey: invalid agent index");
  return std::vector<bool>(static_cast<std::size_t>(spec_.n_actions), true);
}

PredatorPrey::Cell PredatorPrey::moved(Cell c, int action) const {
  const int last = config_.grid_size - 1;
  switch (action) {
    case 1: c.y = std::max(0, c.y - 1); break;
    case 2: c.y = std::min(last, c.y + 1); break;
    case 3: c.x = std::max(0, c.x - 1); break;
    case 4: c.x = std::min(last, c.x + 1); break;
    default: break;
  }
  return c;
}

StepResult PredatorPrey::step(const std::vector<int>& joint_action) {
  if (!started_) throw EnvStateError("predator_prey: step before reset");
  if (done_) throw EnvStateError("predator_prey: step after terminal");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents)
    throw EnvStateError("predator_prey: joint action size mismatch");
  for (int a : joint_action)
    if (a < 0 || a >= spec_.n_actions) throw EnvStateError("predator_prey: action out of range");

  for (std::size_t i = 0; i < predators_.size(); ++i) predators_[i] = moved(predators_[i], joint_action[i]);
  if (config_.preys_move) {
    std::uniform_int_distribution<int> d(0, 4);
    for (std::size_t j = 0; j < preys_.size(); ++j)
      if (alive_[j]) preys_[j] = moved(preys_[j], d(rng_));
  }

  double reward = 0.0;
  for (std::size_t j = 0; j < preys_.size(); ++j) {
    if (!alive_[j]) continue;
    int adjacent = 0;
    for (const Cell& p : predators_)
      if (std::abs(p.x - preys_[j].x) + std::abs(p.y - preys_[j].y) <= 1) ++adjacent;
    if (adjacent >= 2) {
      alive_[j] = false;
      reward += 1.0;
    } else if (adjacent == 1) {
      reward -= 2.0;
    }
  }

  ++t_;
  const bool cleared = alive_count() == 0;
  const bool at_limit = t_ >= spec_.episode_limit;
  StepResult r;
  r.reward = reward;
  r.terminated = cleared || at_limit;
  r.truncated = !cleared && at_limit;
  r.won = cleared;
  done_ = r.terminated;
  r.next_state = state();
  r.next_obs = observations();
  return r;
}

}  // namespace m2i2::env
