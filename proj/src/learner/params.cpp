#include "learner/params.hpp"

#include "comm/comm_layer.hpp"

#include <cmath>
#include <stdexcept>

namespace m2i2::learner {

ParamBundle init_bundle(const ModelDims& dims, const LearnerConfig& config, Rng& rng) {
  config.validate();
  ParamBundle b;
  if (config.comm == CommMode::drn_topk) comm::init_drn(b.online, dims.obs_dim, rng);
  if (config.comm != CommMode::none) {
    comm::init_encoder(b.online, dims.obs_dim, dims.n_agents, rng);
    if (config.use_reconstruction) models::init_decoder(b.online, dims.n_agents, dims.state_dim, rng);
    if (config.use_inverse) models::init_inverse(b.online, dims.n_agents, dims.n_actions, rng);
  }
  models::init_policy(b.online, dims.obs_dim, dims.n_agents, dims.n_actions, rng);
  if (config.mixer == models::MixerKind::qmix) models::init_qmix(b.online, dims.n_agents, dims.state_dim, rng);
  b.target = select_groups(b.online, target_groups(config));
  return b;
}

std::vector<std::string> theta_groups(const LearnerConfig& config) {
  std::vector<std::string> g;
  if (config.comm != CommMode::none) {
    g.push_back("encoder");
    if (config.use_reconstruction) g.push_back("decoder");
    if (config.use_inverse) g.push_back("inverse");
  }
  g.push_back("policy");
  if (config.mixer == models::MixerKind::qmix) g.push_back("mixer");
  return g;
}

std::vector<std::string> target_groups(const LearnerConfig& config) {
  std::vector<std::string> g;
  if (config.comm != CommMode::none) g.push_back("encoder");
  g.push_back("policy");
  if (config.mixer == models::MixerKind::qmix) g.push_back("mixer");
  return g;
}

ParamSet select_groups(const ParamSet& params, const std::vector<std::string>& groups) {
  ParamSet out;
  for (const auto& grp : groups) {
    ParamSet part = select_group(params, grp);
    out.insert(part.begin(), part.end());
  }
  return out;
}

void overwrite(ParamSet& into, const ParamSet& from) {
  for (const auto& [k, v] : from) {
    auto it = into.find(k);
    if (it == into.end()) throw std::out_of_range("overwrite: unknown parameter " + k);
    if (it->second.rows() != v.rows() || it->second.cols() != v.cols())
      throw ad::ShapeError("overwrite: shape mismatch for " + k);
    it->second = v;
  }
}

ParamSet axpy(const ParamSet& x, double alpha, const ParamSet& y) {
  ParamSet out = x;
  for (auto& [k, v] : out) {
    auto it = y.find(k);
    if (it == y.end()) throw std::out_of_range("axpy: missing " + k);
    v += alpha * it->second;
  }
  return out;
}

double global_norm(const ParamSet& p) {
  double s = 0.0;
  for (const auto& [k, v] : p) s += v.squaredNorm();
  return std::sqrt(s);
}

bool all_finite(const ParamSet& p) {
  for (const auto& [k, v] : p)
    if (!v.allFinite()) return false;
  return true;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  for (const auto& [k, v] : p) out.emplace(k, Matrix::Zero(v.rows(), v.cols()));
  return out;
}

}  // namespace m2i2::learner
