#include "env/env.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace m2i2::env {

HallwayConfig HallwayConfig::group_default() {
  HallwayConfig c;
  c.chain_lengths = {3, 5, 7, 4, 6, 8, 10};
  c.groups = {{0, 1, 2}, {3, 4, 5, 6}};
  return c;
}

Hallway::Hallway(HallwayConfig config, bool grouped) : config_(std::move(config)), grouped_(grouped) {
  const auto& lengths = config_.chain_lengths;
  if (lengths.empty()) throw InvalidConfig("hallway: at least one chain is required");
  for (int l : lengths)
    if (l < 2) throw InvalidConfig("hallway: every chain length must be >= 2");
  const int n = static_cast<int>(lengths.size());
  max_len_ = *std::max_element(lengths.begin(), lengths.end());

  group_of_.assign(static_cast<std::size_t>(n), 0);
  if (grouped_) {
    if (config_.groups.size() < 2) throw InvalidConfig("hallwaygroup: at least two groups are required");
    std::set<int> seen;
    for (std::size_t gi = 0; gi < config_.groups.size(); ++gi) {
      if (config_.groups[gi].empty()) throw InvalidConfig("hallwaygroup: empty group");
      for (int a : config_.groups[gi]) {
        if (a < 0 || a >= n || !seen.insert(a).second)
          throw InvalidConfig("hallwaygroup: groups must partition the agents");
        group_of_[static_cast<std::size_t>(a)] = static_cast<int>(gi);
      }
    }
    if (static_cast<int>(seen.size()) != n) throw InvalidConfig("hallwaygroup: groups must cover every agent");
  } else if (!config_.groups.empty()) {
    throw InvalidConfig("hallway: groups are only valid for hallwaygroup");
  }

  spec_.n_agents = n;
  spec_.n_actions = 3;
  spec_.obs_dim = (max_len_ + 1) + n;
  spec_.state_dim = n * (max_len_ + 1);
  spec_.episode_limit = max_len_ + 10;
  pos_.assign(static_cast<std::size_t>(n), 1);
}

Vector Hallway::state() const {
  const int slots = max_len_ + 1;
  Vector s = Vector::Zero(spec_.state_dim);
  for (int i = 0; i < spec_.n_agents; ++i) s(i * slots + pos_[static_cast<std::size_t>(i)]) = 1.0;
  return s;
}

std::vector<Vector> Hallway::observations() const {
  std::vector<Vector> obs;
  for (int i = 0; i < spec_.n_agents; ++i) {
    Vector o = Vector::Zero(spec_.obs_dim);
    o(pos_[static_cast<std::size_t>(i)]) = 1.0;
    o(max_len_ + 1 + i) = 1.0;
    obs.push_back(std::move(o));
  }
  return obs;
}

std::vector<int> Hallway::decode_state(const Vector& state) const {
  const int slots = max_len_ + 1;
  if (state.size() != spec_.state_dim) throw EnvStateError("hallway: state length mismatch");
  std::vector<int> out;
  for (int i = 0; i < spec_.n_agents; ++i) {
    Eigen::Index at = 0;
    state.segment(i * slots, slots).maxCoeff(&at);
    out.push_back(static_cast<int>(at));
  }
  return out;
}

ResetResult Hallway::reset(std::uint64_t seed) {
  rng_.seed(seed);
  for (int i = 0; i < spec_.n_agents; ++i) {
    std::uniform_int_distribution<int> d(1, config_.chain_lengths[static_cast<std::size_t>(i)]);
    pos_[static_cast<std::size_t>(i)] = d(rng_);
  }
  group_done_.assign(config_.groups.size(), false);
  earned_ = 0.0;
  t_ = 0;
  started_ = true;
  done_ = false;
  return {state(), observations()};
}

void Hallway::set_positions(const std::vector<int>& positions) {
  if (positions.size() != pos_.size()) throw EnvStateError("hallway: wrong number of positions");
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (positions[i] < 0 || positions[i] > config_.chain_lengths[i]) throw EnvStateError("hallway: position off chain");
  pos_ = positions;
  group_done_.assign(config_.groups.size(), false);
  earned_ = 0.0;
  t_ = 0;
  started_ = true;
  done_ = false;
}

std::vector<bool> Hallway::avail_actions(int agent) const {
  if (agent < 0 || agent >= spec_.n_agents) throw std::out_of_range("hallway: invalid agent index");
  return std::vector<bool>(static_cast<std::size_t>(spec_.n_actions), true);
}

void Hallway::check_action(const std::vector<int>& joint_action) const {
  if (!started_) throw EnvStateError("hallway: step before reset");
  if (done_) throw EnvStateError("hallway: step after terminal");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents) throw EnvStateError("hallway: joint action size mismatch");
  for (int a : joint_action)
    if (a < 0 || a >= spec_.n_actions) throw EnvStateError("hallway: action out of range");
}

StepResult Hallway::finish(double reward, bool terminated, bool won) {
  StepResult r;
  r.reward = reward;
  r.terminated = terminated;
  r.won = won;
  done_ = terminated;
  r.next_state = state();
  r.next_obs = observations();
  return r;
}

StepResult Hallway::step(const std::vector<int>& joint_action) {
  check_action(joint_action);
  const int n = spec_.n_agents;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (grouped_ && group_done_[static_cast<std::size_t>(group_of_[ui])]) continue;  // parked at g
    int& p = pos_[ui];
    if (joint_action[ui] == 1) p = std::max(0, p - 1);
    if (joint_action[ui] == 2) p = std::min(config_.chain_lengths[ui], p + 1);
  }
  ++t_;
  const bool at_limit = t_ >= spec_.episode_limit;

  if (!grouped_) {
    const bool any = std::any_of(pos_.begin(), pos_.end(), [](int p) { return p == 0; });
    const bool all = std::all_of(pos_.begin(), pos_.end(), [](int p) { return p == 0; });
    StepResult r = finish(all ? 1.0 : 0.0, any || at_limit, all);
    r.truncated = !any && at_limit;
    return r;
  }

  // Grouped: each group must arrive as a whole, and no two groups together.
  const std::size_t n_groups = config_.groups.size();
  int arrivals = 0;
  bool failure = false;
  std::vector<std::size_t> completed;
  for (std::size_t gi = 0; gi < n_groups; ++gi) {
    if (group_done_[gi]) continue;
    int at_goal = 0;
    for (int a : config_.groups[gi]) at_goal += pos_[static_cast<std::size_t>(a)] == 0 ? 1 : 0;
    if (at_goal == 0) continue;
    if (at_goal == static_cast<int>(config_.groups[gi].size())) {
      completed.push_back(gi);
      ++arrivals;
    } else {
      failure = true;
    }
  }
  if (arrivals > 1) failure = true;
  if (failure) {
    // Total episode return becomes 0.
    StepResult r = finish(-earned_, true, false);
    earned_ = 0.0;
    return r;
  }
  double reward = 0.0;
  for (std::size_t gi : completed) {
    group_done_[gi] = true;
    reward += 1.0 / static_cast<double>(n_groups);
  }
  earned_ += reward;
  const bool all_done = std::all_of(group_done_.begin(), group_done_.end(), [](bool d) { return d; });
  StepResult r = finish(reward, all_done || at_limit, all_done);
  r.truncated = !all_done && at_limit;
  return r;
}

}  // namespace m2i2::env
